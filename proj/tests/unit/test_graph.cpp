#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "engrave/error.h"
#include "engrave/graph.h"
#include "helpers.h"

using namespace engrave;

namespace {

using EdgeSet = std::set<std::pair<int, int>>;

EdgeSet as_set(const std::vector<Edge>& edges) {
  EdgeSet s;
  for (const auto& e : edges) s.emplace(e.src, e.dst);
  return s;
}

Score random_score(ad::Rng& rng, int notes, Tick span, int divisions = 4) {
  std::vector<RawNote> raw;
  for (int i = 0; i < notes; ++i) {
    raw.push_back({static_cast<Tick>(rng.below(span)), 1 + static_cast<Tick>(rng.below(8)),
                   40 + static_cast<int>(rng.below(40))});
  }
  return build_score(divisions, {{0, 4, 4}}, raw).score;
}

// The four relation rules applied to every ordered pair.
std::array<EdgeSet, 4> brute_force_relations(const Score& s) {
  std::array<EdgeSet, 4> out;
  for (const auto& u : s.notes) {
    for (const auto& v : s.notes) {
      if (u.id == v.id) continue;
      if (u.onset_div == v.onset_div) out[0].emplace(u.id, v.id);
      if (u.onset_div < v.onset_div && v.onset_div < u.offset_div()) out[1].emplace(u.id, v.id);
      Tick next_at_or_after = -1, next_after = -1;
      for (const auto& x : s.notes) {
        if (x.onset_div >= u.offset_div() && (next_at_or_after < 0 || x.onset_div < next_at_or_after)) {
          next_at_or_after = x.onset_div;
        }
        if (x.onset_div > u.offset_div() && (next_after < 0 || x.onset_div < next_after)) {
          next_after = x.onset_div;
        }
      }
      if (u.offset_div() == v.onset_div && v.onset_div == next_at_or_after) out[2].emplace(u.id, v.id);
      if (u.offset_div() < v.onset_div && v.onset_div == next_after) {
        bool sounding = false;
        for (const auto& x : s.notes) {
          if (x.onset_div < v.onset_div && x.offset_div() > u.offset_div()) sounding = true;
        }
        if (!sounding) out[3].emplace(u.id, v.id);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("single note gives no edges and no candidates") {
  const Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}}).score;
  const ScoreGraph g = build_graph(s);
  CHECK(g.edge_count() == 0);
  CHECK(g.candidate_pairs.empty());
  CHECK(g.chord_candidates.empty());
}

TEST_CASE("two simultaneous equal notes are linked by onset edges only") {
  const Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}, {0, 4, 64}}).score;
  const ScoreGraph g = build_graph(s);
  CHECK(as_set(g.relation(Relation::kOnset)) == EdgeSet{{0, 1}});
  CHECK(as_set(g.relation(Relation::kOnsetInv)) == EdgeSet{{1, 0}});
  CHECK(g.edge_count() == 2);
  CHECK(g.candidate_pairs.empty());
  CHECK(g.chord_candidates == std::vector<NotePair>{{0, 1}});
}

TEST_CASE("a note ending where the next begins is a candidate one way only") {
  const Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}, {4, 4, 62}}).score;
  const auto c = candidate_pairs(s);
  CHECK(c == std::vector<NotePair>{{0, 1}});
}

TEST_CASE("empty score is rejected") {
  Score s;
  s.divisions_per_quarter = 1;
  s.time_signatures = {{0, 4, 4}};
  CHECK_THROWS_AS(build_graph(s), Error);
}

TEST_CASE("relations equal a brute-force application of the rules") {
  ad::Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const Score s = random_score(rng, 12, 16);
    const ScoreGraph g = build_graph(s);
    const auto expect = brute_force_relations(s);
    const EdgeSet onset_all = [&] {
      EdgeSet all = as_set(g.relation(Relation::kOnset));
      for (const auto& e : g.relation(Relation::kOnsetInv)) all.emplace(e.src, e.dst);
      return all;
    }();
    CHECK(onset_all == expect[0]);
    CHECK(as_set(g.relation(Relation::kDuring)) == expect[1]);
    CHECK(as_set(g.relation(Relation::kFollow)) == expect[2]);
    CHECK(as_set(g.relation(Relation::kSilence)) == expect[3]);
    for (int r = 0; r < 4; ++r) {
      EdgeSet inverse;
      for (const auto& e : g.edges[r]) inverse.emplace(e.dst, e.src);
      CHECK(as_set(g.edges[r + 4]) == inverse);
      CHECK(g.edges[r].size() == g.edges[r + 4].size());
      for (const auto& e : g.edges[r]) {
        CHECK(e.src != e.dst);
        CHECK(e.src < g.node_count);
        CHECK(e.dst < g.node_count);
      }
    }
  }
}

TEST_CASE("candidate set equals brute-force enumeration") {
  ad::Rng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const Score s = random_score(rng, 10, 48);
    for (bool cross : {true, false}) {
      EdgeSet expect;
      for (const auto& u : s.notes) {
        for (const auto& w : s.notes) {
          if (u.offset_div() > w.onset_div) continue;
          if (u.bar_index == w.bar_index) expect.emplace(u.id, w.id);
          if (cross && w.bar_index == u.bar_index + 1 && w.onset_div == w.bar_onset_div) {
            expect.emplace(u.id, w.id);
          }
        }
      }
      const auto got = candidate_pairs(s, {cross});
      CHECK(EdgeSet(got.begin(), got.end()) == expect);
      CHECK(got.size() == expect.size());
    }
    EdgeSet chords;
    for (const auto& u : s.notes) {
      for (const auto& w : s.notes) {
        if (u.id < w.id && u.onset_div == w.onset_div) chords.emplace(u.id, w.id);
      }
    }
    const auto got = chord_candidate_pairs(s);
    EdgeSet normalized;
    for (const auto& [a, b] : got) normalized.emplace(std::min(a, b), std::max(a, b));
    CHECK(normalized == chords);
  }
}

TEST_CASE("graph does not depend on input note order") {
  ad::Rng rng(9);
  std::vector<RawNote> raw;
  for (int i = 0; i < 15; ++i) {
    raw.push_back({static_cast<Tick>(rng.below(32)), 1 + static_cast<Tick>(rng.below(6)),
                   48 + static_cast<int>(rng.below(24))});
  }
  const Score a = build_score(4, {{0, 4, 4}}, raw).score;
  std::reverse(raw.begin(), raw.end());
  const Score b = build_score(4, {{0, 4, 4}}, raw).score;
  const ScoreGraph ga = build_graph(a), gb = build_graph(b);
  CHECK(ga.edges == gb.edges);
  CHECK(ga.candidate_pairs == gb.candidate_pairs);
  CHECK(ga.features == gb.features);
  CHECK(ga.note_order == gb.note_order);
}

TEST_CASE("coverage report and graph dump") {
  const Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}, {4, 4, 62}, {16, 4, 64}}).score;
  const auto wide = candidate_coverage({{0, 1}, {1, 2}}, candidate_pairs(s, {true}));
  const auto strict = candidate_coverage({{0, 1}, {1, 2}}, candidate_pairs(s, {false}));
  CHECK(wide.fraction() == 1.0);
  CHECK(strict.covered == 1);
  CHECK(strict.missing == std::vector<NotePair>{{1, 2}});
  std::ostringstream out;
  dump_graph_jsonl(build_graph(s), out);
  CHECK(out.str().find("\"relation\":\"follow\"") != std::string::npos);
}
