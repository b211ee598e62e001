#include <doctest.h>

#include <cmath>

#include "engrave/decoders.h"
#include "engrave/error.h"
#include "engrave/model.h"
#include "engrave/synthetic.h"
#include "helpers.h"

using namespace engrave;
using ad::Matrix;
using ad::Value;

namespace {

struct Fixture {
  Score score;
  ScoreGraph graph;
};

Fixture sample(std::uint64_t seed, int notes = 12) {
  ad::Rng rng(seed);
  SyntheticOptions o;
  o.notes = notes;
  Fixture f;
  f.score = random_labeled_score(rng, o);
  f.graph = build_graph(f.score);
  return f;
}

double log_sum_exp(std::span<const double> row) {
  double m = row[0];
  for (double v : row) m = std::max(m, v);
  double s = 0.0;
  for (double v : row) s += std::exp(v - m);
  return m + std::log(s);
}

double bce(double logit, double target) {
  const double p = 1.0 / (1.0 + std::exp(-logit));
  return -(target * std::log(p) + (1 - target) * std::log(1 - p));
}

// Total loss recomputed from the logits with textbook formulas.
double reference_loss(const HeadOutputs& out, const LabelSet& labels, const ScoreGraph& g) {
  double total = 0.0;
  for (int k = 0; k < kNumNodeHeads; ++k) {
    const Matrix& m = out.node_logits[k].data();
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) {
      const int t = label_class(labels.notes[i], static_cast<NodeHead>(k));
      s += log_sum_exp(m.row(i)) - m(i, t);
    }
    total += s / m.rows;
  }
  auto pair_term = [&](const Matrix& logits, const std::vector<NotePair>& pairs, bool chord) {
    if (pairs.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      auto [u, w] = pairs[i];
      bool hit = false;
      for (auto [a, b] : chord ? labels.chord_edges : labels.voice_edges) {
        hit |= chord ? (std::min(a, b) == std::min(u, w) && std::max(a, b) == std::max(u, w))
                     : (a == u && b == w);
      }
      s += bce(logits.data[i], hit ? 1.0 : 0.0);
    }
    return s / pairs.size();
  };
  total += pair_term(out.voice_logits.data(), g.candidate_pairs, false);
  total += pair_term(out.chord_logits.data(), g.chord_candidates, true);
  return total;
}

}  // namespace

TEST_CASE("zeroed output layers give uniform heads and ln K losses") {
  const Fixture f = sample(1);
  ModelConfig mc;
  mc.encoder.hidden_size = 16;
  Model model(mc, 3);
  model.heads().zero_output_layers();
  const PredictionBundle b = model.predict(f.graph);
  for (double v : b.logits(NodeHead::kSpelling).data) CHECK(v == 0.0);
  for (double p : b.voice_prob) CHECK(p == 0.5);
  for (double p : b.chord_prob) CHECK(p == 0.5);
  CHECK(b.lower_staff_probability(0) == 0.5);

  ad::Rng rng(0);
  const LossBreakdown loss = total_loss(model.forward(f.graph, rng, false), *f.score.labels, f.graph);
  for (int k = 0; k < kNumNodeHeads; ++k) {
    CHECK(std::abs(loss.node[k] - std::log(kNodeHeadWidths[k])) < 1e-9);
  }
  CHECK(std::abs(loss.voice - std::log(2.0)) < 1e-9);
  CHECK(std::abs(loss.chord - std::log(2.0)) < 1e-9);
}

TEST_CASE("loss matches a textbook recomputation and splits per head") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Fixture f = sample(seed + 10);
    ModelConfig mc;
    mc.encoder.hidden_size = 8;
    const Model model(mc, seed);
    ad::Rng rng(0);
    const HeadOutputs out = model.forward(f.graph, rng, false);
    const LossBreakdown loss = total_loss(out, *f.score.labels, f.graph);
    CHECK(std::abs(loss.total.item() - reference_loss(out, *f.score.labels, f.graph)) < 1e-12);
    double parts = loss.voice + loss.chord;
    for (double v : loss.node) parts += v;
    CHECK(std::abs(parts - loss.total.item()) < 1e-12);
  }
}

TEST_CASE("a score without voice candidates drops the voice term") {
  Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}}).score;
  s.labels = LabelSet{{NoteLabels{}}, {}, {}};
  const ScoreGraph g = build_graph(s);
  REQUIRE(g.candidate_pairs.empty());
  ModelConfig mc;
  mc.encoder.hidden_size = 4;
  const Model model(mc, 1);
  ad::Rng rng(0);
  const HeadOutputs out = model.forward(g, rng, false);
  CHECK(out.voice_logits.rows() == 0);
  const LossBreakdown loss = total_loss(out, *s.labels, g);
  CHECK(loss.voice == 0.0);
  CHECK(loss.chord == 0.0);
  CHECK(std::isfinite(loss.total.item()));
}

TEST_CASE("confident correct logits give near-zero loss") {
  const Fixture f = sample(4);
  const PredictionBundle oracle = bundle_from_labels(*f.score.labels, f.graph);
  HeadOutputs out;
  for (int k = 0; k < kNumNodeHeads; ++k) out.node_logits[k] = Value::constant(oracle.node_logits[k]);
  auto logit_column = [](const std::vector<double>& p) {
    Matrix m(static_cast<int>(p.size()), 1);
    for (std::size_t i = 0; i < p.size(); ++i) m.data[i] = p[i] > 0.5 ? 20.0 : -20.0;
    return Value::constant(m);
  };
  out.voice_logits = logit_column(oracle.voice_prob);
  out.chord_logits = logit_column(oracle.chord_prob);
  CHECK(total_loss(out, *f.score.labels, f.graph).total.item() < 1e-3);
  for (int id = 0; id < f.graph.node_count; ++id) {
    for (NodeHead h : kAllNodeHeads) CHECK(oracle.argmax(h, id) == label_class(f.score.labels->notes[id], h));
  }
}

TEST_CASE("labels outside a head's range are rejected") {
  Fixture f = sample(6);
  f.score.labels->notes[0].dots = 7;
  ModelConfig mc;
  mc.encoder.hidden_size = 4;
  const Model model(mc, 1);
  ad::Rng rng(0);
  try {
    total_loss(model.forward(f.graph, rng, false), *f.score.labels, f.graph);
    FAIL("expected LabelOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLabelOutOfRange);
  }
}

TEST_CASE("pair logits do not depend on unrelated nodes") {
  const Fixture f = sample(7);
  REQUIRE(!f.graph.candidate_pairs.empty());
  ad::Rng rng(2);
  const HeadParams heads = HeadParams::init(5, 7, rng);
  Matrix emb = random_matrix(f.graph.node_count, 5, rng);
  const HeadOutputs a = run_heads(Value::constant(emb), f.graph, heads);
  const auto [u, w] = f.graph.candidate_pairs[0];
  int other = 0;
  while (other == u || other == w) ++other;
  for (double& v : emb.row(other)) v += 1.0;
  const HeadOutputs b = run_heads(Value::constant(emb), f.graph, heads);
  CHECK(a.voice_logits.data().data[0] == b.voice_logits.data().data[0]);
}
