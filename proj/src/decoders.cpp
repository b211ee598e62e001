#include "engrave/decoders.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "engrave/error.h"

namespace engrave {

using ad::Matrix;
using ad::Value;

namespace {

constexpr double kOracleMargin = 20.0;
constexpr double kOracleProb = 1e-6;

NodeMlp make_node_mlp(int in, int hidden, int out, ad::Rng& rng) {
  return {Value::parameter(ad::glorot(in, hidden, rng)), Value::parameter(Matrix(1, hidden)),
          Value::parameter(ad::glorot(hidden, out, rng)), Value::parameter(Matrix(1, out))};
}

PairMlp make_pair_mlp(int in, int hidden, ad::Rng& rng) {
  // Glorot limits computed for the full 2*in fan-in of [h_u; h_w].
  Matrix full = ad::glorot(2 * in, hidden, rng);
  Matrix top(in, hidden), bottom(in, hidden);
  std::copy(full.data.begin(), full.data.begin() + top.size(), top.data.begin());
  std::copy(full.data.begin() + top.size(), full.data.end(), bottom.data.begin());
  return {Value::parameter(std::move(top)), Value::parameter(std::move(bottom)),
          Value::parameter(Matrix(1, hidden)), Value::parameter(ad::glorot(hidden, 1, rng)),
          Value::parameter(Matrix(1, 1))};
}

Value node_head(const Value& h, const NodeMlp& mlp) {
  const Value hidden = ad::relu(ad::add(ad::matmul(h, mlp.w1), mlp.b1));
  return ad::add(ad::matmul(hidden, mlp.w2), mlp.b2);
}

Value pair_head(const Value& h, const std::vector<NotePair>& pairs, const PairMlp& mlp) {
  std::vector<int> src, dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (const auto& [u, w] : pairs) {
    src.push_back(u);
    dst.push_back(w);
  }
  const Value a = ad::row_gather(ad::matmul(h, mlp.w1_src), src);
  const Value b = ad::row_gather(ad::matmul(h, mlp.w1_dst), dst);
  if (pairs.empty()) return Value::constant(Matrix(0, 1));
  const Value hidden = ad::relu(ad::add(ad::add(a, b), mlp.b1));
  return ad::add(ad::matmul(hidden, mlp.w2), mlp.b2);
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> probabilities(const Value& logits) {
  std::vector<double> out;
  out.reserve(logits.data().size());
  for (double x : logits.data().data) out.push_back(stable_sigmoid(x));
  return out;
}

void zero(Value v) {
  std::fill(v.mutable_data().data.begin(), v.mutable_data().data.end(), 0.0);
}

NotePair unordered(NotePair p) {
  return p.first < p.second ? p : NotePair{p.second, p.first};
}

}  // namespace

HeadParams HeadParams::init(int embedding_size, int hidden_size, ad::Rng& rng) {
  HeadParams p;
  for (int k = 0; k < kNumNodeHeads; ++k) {
    p.node[k] = make_node_mlp(embedding_size, hidden_size, kNodeHeadWidths[k], rng);
  }
  p.voice = make_pair_mlp(embedding_size, hidden_size, rng);
  p.chord = make_pair_mlp(embedding_size, hidden_size, rng);
  return p;
}

void HeadParams::collect(ad::ParameterList& out) const {
  for (int k = 0; k < kNumNodeHeads; ++k) {
    const std::string prefix =
        "heads." + std::string(node_head_name(static_cast<NodeHead>(k))) + ".";
    out.push_back({prefix + "w1", node[k].w1});
    out.push_back({prefix + "b1", node[k].b1});
    out.push_back({prefix + "w2", node[k].w2});
    out.push_back({prefix + "b2", node[k].b2});
  }
  for (const auto& [name, mlp] : {std::pair<const char*, const PairMlp*>{"voice", &voice},
                                  std::pair<const char*, const PairMlp*>{"chord", &chord}}) {
    const std::string prefix = std::string("heads.") + name + ".";
    out.push_back({prefix + "w1_src", mlp->w1_src});
    out.push_back({prefix + "w1_dst", mlp->w1_dst});
    out.push_back({prefix + "b1", mlp->b1});
    out.push_back({prefix + "w2", mlp->w2});
    out.push_back({prefix + "b2", mlp->b2});
  }
}

void HeadParams::zero_output_layers() {
  for (auto& mlp : node) {
    zero(mlp.w2);
    zero(mlp.b2);
  }
  for (auto* mlp : {&voice, &chord}) {
    zero(mlp->w2);
    zero(mlp->b2);
  }
}

HeadOutputs run_heads(const Value& embeddings, const ScoreGraph& graph, const HeadParams& params) {
  if (embeddings.rows() != graph.node_count) {
    throw Error(ErrorCode::kShapeMismatch, "heads: embedding rows differ from node count");
  }
  HeadOutputs out;
  for (int k = 0; k < kNumNodeHeads; ++k) out.node_logits[k] = node_head(embeddings, params.node[k]);
  out.voice_logits = pair_head(embeddings, graph.candidate_pairs, params.voice);
  out.chord_logits = pair_head(embeddings, graph.chord_candidates, params.chord);
  return out;
}

double PredictionBundle::lower_staff_probability(int id) const {
  const Matrix& m = logits(NodeHead::kStaff);
  return stable_sigmoid(m(id, 1) - m(id, 0));
}

int PredictionBundle::argmax(NodeHead h, int id) const {
  if (h == NodeHead::kStaff) return lower_staff_probability(id) >= 0.5 ? 1 : 0;
  const auto row = logits(h).row(id);
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

PredictionBundle to_bundle(const HeadOutputs& outputs, const ScoreGraph& graph) {
  PredictionBundle b;
  for (int k = 0; k < kNumNodeHeads; ++k) b.node_logits[k] = outputs.node_logits[k].data();
  b.voice_pairs = graph.candidate_pairs;
  b.voice_prob = probabilities(outputs.voice_logits);
  b.chord_pairs = graph.chord_candidates;
  b.chord_prob = probabilities(outputs.chord_logits);
  return b;
}

PredictionBundle decode_all(const Value& embeddings, const ScoreGraph& graph,
                            const HeadParams& params) {
  return to_bundle(run_heads(embeddings, graph, params), graph);
}

std::vector<double> voice_targets(const LabelSet& labels, const ScoreGraph& graph,
                                  std::size_t* excluded) {
  std::vector<NotePair> truth = labels.voice_edges;
  std::sort(truth.begin(), truth.end());
  std::vector<double> targets(graph.candidate_pairs.size(), 0.0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (std::binary_search(truth.begin(), truth.end(), graph.candidate_pairs[i])) {
      targets[i] = 1.0;
      ++hits;
    }
  }
  if (excluded) {
    truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
    *excluded = truth.size() - hits;
  }
  return targets;
}

std::vector<double> chord_targets(const LabelSet& labels, const ScoreGraph& graph) {
  std::vector<NotePair> truth;
  truth.reserve(labels.chord_edges.size());
  for (const auto& e : labels.chord_edges) truth.push_back(unordered(e));
  std::sort(truth.begin(), truth.end());
  std::vector<double> targets(graph.chord_candidates.size(), 0.0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (std::binary_search(truth.begin(), truth.end(), unordered(graph.chord_candidates[i]))) {
      targets[i] = 1.0;
    }
  }
  return targets;
}

LossBreakdown total_loss(const HeadOutputs& outputs, const LabelSet& labels,
                         const ScoreGraph& graph) {
  if (static_cast<int>(labels.notes.size()) != graph.node_count) {
    throw Error(ErrorCode::kLabelOutOfRange, "labels do not cover every note");
  }
  LossBreakdown result;
  std::vector<Value> terms;
  for (int k = 0; k < kNumNodeHeads; ++k) {
    const auto head = static_cast<NodeHead>(k);
    std::vector<int> targets;
    targets.reserve(labels.notes.size());
    for (const auto& l : labels.notes) {
      const int cls = label_class(l, head);
      if (cls < 0 || cls >= head_width(head)) {
        throw Error(ErrorCode::kLabelOutOfRange,
                    "label out of range for head " + std::string(node_head_name(head)));
      }
      targets.push_back(cls);
    }
    Value term = ad::cross_entropy(outputs.node_logits[k], targets);
    result.node[k] = term.item();
    terms.push_back(term);
  }
  const auto vt = voice_targets(labels, graph, &result.excluded_voice_edges);
  if (!vt.empty()) {
    Value term = ad::bce_with_logits(outputs.voice_logits, vt);
    result.voice = term.item();
    terms.push_back(term);
  }
  const auto ct = chord_targets(labels, graph);
  if (!ct.empty()) {
    Value term = ad::bce_with_logits(outputs.chord_logits, ct);
    result.chord = term.item();
    terms.push_back(term);
  }
  Value total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  if (!std::isfinite(total.item())) throw Error(ErrorCode::kNonFiniteLoss, "loss is not finite");
  result.total = total;
  return result;
}

PredictionBundle bundle_from_labels(const LabelSet& labels, const ScoreGraph& graph) {
  PredictionBundle b;
  const int n = graph.node_count;
  for (int k = 0; k < kNumNodeHeads; ++k) {
    const auto head = static_cast<NodeHead>(k);
    Matrix m(n, head_width(head));
    for (int id = 0; id < n; ++id) m(id, label_class(labels.notes.at(id), head)) = kOracleMargin;
    b.node_logits[k] = std::move(m);
  }
  b.voice_pairs = graph.candidate_pairs;
  for (double t : voice_targets(labels, graph)) {
    b.voice_prob.push_back(t > 0.5 ? 1.0 - kOracleProb : kOracleProb);
  }
  b.chord_pairs = graph.chord_candidates;
  for (double t : chord_targets(labels, graph)) {
    b.chord_prob.push_back(t > 0.5 ? 1.0 - kOracleProb : kOracleProb);
  }
  return b;
}

}  // namespace engrave
