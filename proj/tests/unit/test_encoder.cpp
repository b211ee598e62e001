#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "engrave/encoder.h"
#include "engrave/synthetic.h"
#include "helpers.h"

using namespace engrave;
using ad::Matrix;
using ad::Value;

namespace {

using Dense = std::vector<std::vector<double>>;

Dense dense(const Matrix& m) {
  Dense d(m.rows, std::vector<double>(m.cols));
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) d[i][j] = m(i, j);
  }
  return d;
}

Dense times(const Dense& a, const Matrix& w) {
  Dense out(a.size(), std::vector<double>(w.cols, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int k = 0; k < w.rows; ++k) {
      for (int j = 0; j < w.cols; ++j) out[i][j] += a[i][k] * w(k, j);
    }
  }
  return out;
}

std::vector<double> norm_row(const std::vector<double>& x, const Matrix& gain, const Matrix& bias) {
  const double n = static_cast<double>(x.size());
  double mu = 0.0;
  for (double v : x) mu += v / n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu) / n;
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = (x[j] - mu) / std::sqrt(var + 1e-5) * gain.data[j] + bias.data[j];
  }
  return out;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Eval-mode encoder on plain vectors: neighbour sums per relation, ReLU,
// then a GRU over the note order, then the block norm.
Dense reference_encode(const ScoreGraph& g, const EncoderParams& p, const EncoderConfig& c) {
  const int n = g.node_count, H = c.hidden_size;
  Dense x(n, std::vector<double>(kNumFeatures));
  for (int i = 0; i < n; ++i) x[i].assign(g.features[i].begin(), g.features[i].end());
  Dense h = times(x, p.input_weight.data());
  for (auto& row : h) {
    for (int j = 0; j < H; ++j) row[j] += p.input_bias.data().data[j];
  }
  const Dense initial = h;
  for (const auto& layer : p.layers) {
    Dense conv = times(h, layer.self_weight.data());
    for (int r = 0; r < kNumRelations; ++r) {
      Dense agg(n, std::vector<double>(H, 0.0));
      std::vector<int> degree(n, 0);
      for (const auto& e : g.edges[r]) {
        for (int j = 0; j < H; ++j) agg[e.dst][j] += h[e.src][j];
        ++degree[e.dst];
      }
      if (c.aggregation == Aggregation::kMean) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < H; ++j) agg[i][j] = degree[i] ? agg[i][j] / degree[i] : 0.0;
        }
      }
      const Dense m = times(agg, layer.relation_weights[r].data());
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < H; ++j) conv[i][j] += m[i][j];
      }
    }
    for (auto& row : conv) {
      for (double& v : row) v = std::max(v, 0.0);
    }
    Dense block = conv;
    if (c.use_gru) {
      const Dense& seq = c.gru_input == GruInput::kConvOutput ? conv : initial;
      const Dense xp = times(seq, layer.gru.w_input.data());
      std::vector<double> state(H, 0.0);
      Dense out(n);
      for (int id : g.note_order) {
        const Dense hp_raw = times(Dense{state}, layer.gru.w_hidden.data());
        const auto hp = norm_row(hp_raw[0], layer.gru.ln_gain.data(), layer.gru.ln_bias.data());
        std::vector<double> next(H);
        for (int j = 0; j < H; ++j) {
          const double* bi = layer.gru.b_input.data().data.data();
          const double rg = logistic(xp[id][j] + bi[j] + hp[j]);
          const double zg = logistic(xp[id][H + j] + bi[H + j] + hp[H + j]);
          const double cand = std::tanh(xp[id][2 * H + j] + bi[2 * H + j] + rg * hp[2 * H + j]);
          next[j] = (1 - zg) * cand + zg * state[j];
        }
        state = next;
        out[id] = next;
      }
      if (c.gru_input == GruInput::kConvOutput) {
        block = out;
      } else {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < H; ++j) block[i][j] += out[i][j];
        }
      }
    }
    for (int i = 0; i < n; ++i) h[i] = norm_row(block[i], layer.norm_gain.data(), layer.norm_bias.data());
  }
  return h;
}

ScoreGraph sample_graph(std::uint64_t seed, int notes = 12) {
  ad::Rng rng(seed);
  SyntheticOptions o;
  o.notes = notes;
  return build_graph(random_labeled_score(rng, o));
}

// Relabels node i as perm[i] everywhere in the graph.
ScoreGraph relabel(const ScoreGraph& g, const std::vector<int>& perm) {
  ScoreGraph out = g;
  for (int i = 0; i < g.node_count; ++i) out.features[perm[i]] = g.features[i];
  for (int r = 0; r < kNumRelations; ++r) {
    for (auto& e : out.edges[r]) e = {perm[e.src], perm[e.dst]};
    std::sort(out.edges[r].begin(), out.edges[r].end());
  }
  for (auto& id : out.note_order) id = perm[id];
  for (auto& [u, w] : out.candidate_pairs) u = perm[u], w = perm[w];
  for (auto& [u, w] : out.chord_candidates) u = perm[u], w = perm[w];
  return out;
}

// Gives the layer-norm and GRU parameters non-trivial values.
void jitter(EncoderParams& p, ad::Rng& rng) {
  for (auto& layer : p.layers) {
    for (Value* v : {&layer.gru.b_input, &layer.gru.ln_gain, &layer.gru.ln_bias, &layer.norm_gain,
                     &layer.norm_bias}) {
      for (double& x : v->mutable_data().data) x += rng.uniform(-0.3, 0.3);
    }
  }
  for (double& x : p.input_bias.mutable_data().data) x = rng.uniform(-0.3, 0.3);
}

}  // namespace

TEST_CASE("encoder equals a plain-vector reimplementation") {
  for (auto agg : {Aggregation::kSum, Aggregation::kMean}) {
    for (auto gin : {GruInput::kConvOutput, GruInput::kInitialFeatures}) {
      for (bool gru : {true, false}) {
        EncoderConfig c;
        c.hidden_size = 6;
        c.num_layers = 2;
        c.aggregation = agg;
        c.gru_input = gin;
        c.use_gru = gru;
        ad::Rng rng(21);
        EncoderParams p = EncoderParams::init(c, rng);
        jitter(p, rng);
        const ScoreGraph g = sample_graph(7);
        const Matrix got = encode(g, p, c, rng, false).data();
        const Dense want = reference_encode(g, p, c);
        double worst = 0.0;
        for (int i = 0; i < g.node_count; ++i) {
          for (int j = 0; j < c.hidden_size; ++j) worst = std::max(worst, std::abs(got(i, j) - want[i][j]));
        }
        CHECK(worst < 1e-12);
      }
    }
  }
}

TEST_CASE("without edges and with identity self weight the layer is norm(relu(h0))") {
  EncoderConfig c;
  c.hidden_size = 5;
  c.num_layers = 1;
  c.use_gru = false;
  ad::Rng rng(3);
  EncoderParams p = EncoderParams::init(c, rng);
  Matrix eye(5, 5);
  for (int i = 0; i < 5; ++i) eye(i, i) = 1.0;
  p.layers[0].self_weight.mutable_data() = eye;

  ScoreGraph g;
  g.node_count = 3;
  g.note_order = {0, 1, 2};
  for (int i = 0; i < 3; ++i) {
    std::array<double, kNumFeatures> row{};
    for (double& v : row) v = rng.uniform(-1, 1);
    g.features.push_back(row);
  }
  const Matrix got = encode(g, p, c, rng, false).data();
  const Matrix h0 = ad::add(ad::matmul(feature_matrix(g), p.input_weight), p.input_bias).data();
  for (int i = 0; i < 3; ++i) {
    std::vector<double> row(h0.row(i).begin(), h0.row(i).end());
    for (double& v : row) v = std::max(v, 0.0);
    const auto want = norm_row(row, p.layers[0].norm_gain.data(), p.layers[0].norm_bias.data());
    for (int j = 0; j < 5; ++j) CHECK(got(i, j) == doctest::Approx(want[j]).epsilon(1e-12));
  }
}

TEST_CASE("relabelling nodes permutes the embeddings") {
  EncoderConfig c;
  c.hidden_size = 8;
  ad::Rng rng(5);
  const EncoderParams p = EncoderParams::init(c, rng);
  const ScoreGraph g = sample_graph(13, 14);
  std::vector<int> perm(g.node_count);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = g.node_count - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  const Matrix a = encode(g, p, c, rng, false).data();
  const Matrix b = encode(relabel(g, perm), p, c, rng, false).data();
  for (int i = 0; i < g.node_count; ++i) {
    for (int j = 0; j < c.hidden_size; ++j) CHECK(std::abs(a(i, j) - b(perm[i], j)) < 1e-12);
  }
}

TEST_CASE("one convolution layer only sees direct neighbours") {
  EncoderConfig c;
  c.hidden_size = 6;
  c.num_layers = 1;
  c.use_gru = false;
  ad::Rng rng(8);
  const EncoderParams p = EncoderParams::init(c, rng);
  ScoreGraph g = sample_graph(17, 16);
  const Matrix before = encode(g, p, c, rng, false).data();
  const int victim = g.note_order.back();
  std::set<int> touched = {victim};
  for (const auto& list : g.edges) {
    for (const auto& e : list) {
      if (e.src == victim) touched.insert(e.dst);
    }
  }
  for (double& v : g.features[victim]) v += 0.5;
  const Matrix after = encode(g, p, c, rng, false).data();
  int unchanged = 0;
  for (int i = 0; i < g.node_count; ++i) {
    if (touched.contains(i)) continue;
    ++unchanged;
    for (int j = 0; j < c.hidden_size; ++j) CHECK(after(i, j) == before(i, j));
  }
  CHECK(unchanged > 0);
  bool moved = false;
  for (int j = 0; j < c.hidden_size; ++j) moved |= after(victim, j) != before(victim, j);
  CHECK(moved);
}

TEST_CASE("eval mode is deterministic and train mode dropout uses the rng") {
  EncoderConfig c;
  c.hidden_size = 8;
  ad::Rng rng(9);
  const EncoderParams p = EncoderParams::init(c, rng);
  const ScoreGraph g = sample_graph(19);
  ad::Rng r1(1), r2(2);
  CHECK(encode(g, p, c, r1, false).data() == encode(g, p, c, r2, false).data());
  ad::Rng t1(1), t2(1), t3(2);
  const Matrix a = encode(g, p, c, t1, true).data();
  CHECK(a == encode(g, p, c, t2, true).data());
  CHECK(a != encode(g, p, c, t3, true).data());
}

TEST_CASE("encoder config validation and json round trip") {
  EncoderConfig c;
  c.aggregation = Aggregation::kMean;
  c.gru_input = GruInput::kInitialFeatures;
  const EncoderConfig back = EncoderConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  c.dropout_p = 1.0;
  CHECK_THROWS(c.validate());
  c.dropout_p = 0.5;
  c.hidden_size = 0;
  CHECK_THROWS(c.validate());
}
