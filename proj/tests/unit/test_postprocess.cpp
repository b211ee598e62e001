#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "engrave/error.h"
#include "engrave/musicxml.h"
#include "engrave/postprocess.h"
#include "helpers.h"

using namespace engrave;

namespace {

using CostMatrix = std::vector<std::vector<double>>;

// Minimum over every injective matching of the smaller side.
double brute_force_min(const CostMatrix& cost) {
  const int r = static_cast<int>(cost.size());
  const int c = static_cast<int>(cost[0].size());
  double best = INFINITY;
  if (r <= c) {
    std::vector<int> cols(c);
    std::iota(cols.begin(), cols.end(), 0);
    do {
      double s = 0.0;
      for (int i = 0; i < r; ++i) s += cost[i][cols[i]];
      best = std::min(best, s);
    } while (std::next_permutation(cols.begin(), cols.end()));
  } else {
    std::vector<int> rows(r);
    std::iota(rows.begin(), rows.end(), 0);
    do {
      double s = 0.0;
      for (int j = 0; j < c; ++j) s += cost[rows[j]][j];
      best = std::min(best, s);
    } while (std::next_permutation(rows.begin(), rows.end()));
  }
  return best;
}

double assignment_cost(const CostMatrix& cost, const Assignment& a) {
  double s = 0.0;
  std::vector<int> used;
  for (std::size_t i = 0; i < a.col_of_row.size(); ++i) {
    const int j = a.col_of_row[i];
    if (j < 0) continue;
    s += cost[i][j];
    used.push_back(j);
  }
  std::sort(used.begin(), used.end());
  CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
  return s;
}

PredictionBundle noisy(const PredictionBundle& base, ad::Rng& rng) {
  PredictionBundle r = base;
  for (auto& m : r.node_logits) {
    for (double& x : m.data) x = rng.uniform(-4, 4);
  }
  for (double& x : r.voice_prob) x = rng.uniform();
  for (double& x : r.chord_prob) x = rng.uniform();
  return r;
}

}  // namespace

TEST_CASE("Hungarian equals the brute-force minimum") {
  ad::Rng rng(12);
  for (int trial = 0; trial < 150; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(6));
    const int c = 1 + static_cast<int>(rng.below(6));
    CostMatrix cost(r, std::vector<double>(c));
    for (auto& row : cost) {
      for (double& v : row) v = rng.uniform(0, 10);
    }
    // Half the trials use the voice-linking layout: real block plus dummies.
    if (trial % 2 == 0) {
      const double dummy = -std::log(rng.uniform(0.2, 0.8));
      const int n = r + c;
      CostMatrix padded(n, std::vector<double>(n, dummy));
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) padded[i][j] = rng.uniform() < 0.2 ? 1e9 : -std::log(rng.uniform(0.01, 1));
      }
      if (n <= 8) cost = padded;
    }
    const Assignment a = hungarian(cost);
    const double want = brute_force_min(cost);
    CHECK(std::abs(a.cost - want) < 1e-9 * std::max(1.0, want));
    CHECK(std::abs(assignment_cost(cost, a) - want) < 1e-9 * std::max(1.0, want));
    const int matched = static_cast<int>(std::count_if(a.col_of_row.begin(), a.col_of_row.end(),
                                                       [](int j) { return j >= 0; }));
    CHECK(matched == std::min<int>(cost.size(), cost[0].size()));
  }
}

TEST_CASE("Hungarian picks the dominant diagonal") {
  CostMatrix cost(5, std::vector<double>(5, 10.0));
  for (int i = 0; i < 5; ++i) cost[i][(i + 2) % 5] = 1.0;
  const Assignment a = hungarian(cost);
  for (int i = 0; i < 5; ++i) CHECK(a.col_of_row[i] == (i + 2) % 5);
  CHECK(a.cost == doctest::Approx(5.0));
}

TEST_CASE("connected components equal a flood-fill oracle") {
  ad::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(20));
    std::vector<NotePair> edges;
    for (int k = 0; k < n; ++k) {
      edges.emplace_back(static_cast<int>(rng.below(n)), static_cast<int>(rng.below(n)));
    }
    std::vector<int> want(n, -1);
    for (int s = 0; s < n; ++s) {
      if (want[s] >= 0) continue;
      std::vector<int> stack = {s};
      want[s] = s;
      while (!stack.empty()) {
        const int x = stack.back();
        stack.pop_back();
        for (auto [a, b] : edges) {
          for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
            if (from == x && want[to] < 0) {
              want[to] = s;
              stack.push_back(to);
            }
          }
        }
      }
    }
    CHECK(connected_components(n, edges) == want);
  }
}

TEST_CASE("chord pooling takes the transitive closure") {
  Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}, {0, 4, 64}, {0, 4, 67}, {4, 4, 60}}).score;
  s.labels = LabelSet{std::vector<NoteLabels>(4), {}, {}};
  const ScoreGraph g = build_graph(s);
  PredictionBundle b = bundle_from_labels(*s.labels, g);
  REQUIRE(b.chord_pairs.size() == 3);
  for (std::size_t i = 0; i < b.chord_pairs.size(); ++i) {
    const auto [u, w] = b.chord_pairs[i];
    b.chord_prob[i] = (u == 0 && w == 2) ? 0.1 : 0.9;
  }
  const auto pools = pool_chords(b, s, 0.5);
  REQUIRE(pools.size() == 2);
  CHECK(pools[0].members == std::vector<int>{0, 1, 2});
  CHECK(pools[1].members == std::vector<int>{3});
}

TEST_CASE("voice probabilities below the threshold start new voices") {
  Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}, {4, 4, 62}, {8, 8, 64}}).score;
  s.labels = LabelSet{std::vector<NoteLabels>(3), {{0, 1}, {1, 2}}, {}};
  const ScoreGraph g = build_graph(s);
  PredictionBundle b = bundle_from_labels(*s.labels, g);
  const auto pools = pool_chords(b, s);
  CHECK(assign_voices(pools, b).size() == 1);
  for (double& p : b.voice_prob) p = 0.3;
  CHECK(assign_voices(pools, b).size() == 3);
}

TEST_CASE("rests fill a gap greedily on aligned positions") {
  const auto rests = fill_rests(4, 16, 0, 4);
  REQUIRE(rests.size() == 2);
  CHECK(rests[0].onset == 4);
  CHECK(rests[0].duration == 4);
  CHECK(rests[0].type == NoteType::kQuarter);
  CHECK(rests[1].onset == 8);
  CHECK(rests[1].duration == 8);
  CHECK(rests[1].type == NoteType::kHalf);
  for (const auto& r : rests) CHECK(r.is_rest());
  CHECK(fill_rests(3, 3, 0, 4).empty());
}

TEST_CASE("key vote and label smoothing") {
  const Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}, {4, 4, 62}, {8, 4, 64}, {12, 4, 65}}).score;
  CHECK(vote_measure_keys(s, {2, 2, 2, 1}) == std::vector<int>{2});
  CHECK(vote_measure_keys(s, {1, 3, 1, 3}) == std::vector<int>{1});

  CHECK(smooth_labels({0, 0, 1, 0, 0}) == std::vector<int>{0, 0, 0, 0, 0});
  CHECK(smooth_labels({1, 1, 1, 0, 0, 0}) == std::vector<int>{1, 1, 1, 0, 0, 0});
  ad::Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> v(1 + rng.below(15));
    for (int& x : v) x = static_cast<int>(rng.below(3));
    const auto once = smooth_labels(v);
    CHECK(smooth_labels(once) == once);
    CHECK(once.size() == v.size());
  }
}

TEST_CASE("oracle bundles reproduce the label engraving and postprocessing is idempotent") {
  for (const char* rel : {"corpus/piece_a.musicxml", "corpus/piece_b.musicxml"}) {
    CAPTURE(rel);
    const Score s = read_musicxml_file(fixture(rel)).score;
    const ScoreGraph g = build_graph(s);
    const PredictionBundle oracle = bundle_from_labels(*s.labels, g);
    const EngravedScore e = postprocess(oracle, s);
    CHECK(e == engrave_from_labels(s));

    // Feeding the engraved labels back in changes nothing.
    const PredictionBundle again = bundle_from_labels(*e.score.labels, g);
    CHECK(postprocess(again, s) == e);
  }
}

TEST_CASE("random bundles always engrave into valid scores") {
  ad::Rng rng(77);
  for (const char* rel : {"corpus/piece_a.musicxml", "corpus/piece_b.musicxml"}) {
    const Score s = read_musicxml_file(fixture(rel)).score;
    const ScoreGraph g = build_graph(s);
    const PredictionBundle base = bundle_from_labels(*s.labels, g);
    for (int t = 0; t < 40; ++t) {
      PostprocessOptions o;
      o.mean_lift = t % 2 == 1;
      const EngravedScore e = postprocess(noisy(base, rng), s, o);
      const auto problems = check_engraved(e);
      CHECK_MESSAGE(problems.empty(), (problems.empty() ? "" : problems.front()));
      CHECK(validate_musicxml(export_musicxml(e)).empty());
    }
  }
}

TEST_CASE("bundle shape must match the score") {
  const Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}, {4, 4, 62}}).score;
  Score t = build_score(4, {{0, 4, 4}}, {{0, 4, 60}}).score;
  t.labels = LabelSet{std::vector<NoteLabels>(1), {}, {}};
  const PredictionBundle b = bundle_from_labels(*t.labels, build_graph(t));
  CHECK_THROWS_AS(pool_chords(b, s), Error);
}
