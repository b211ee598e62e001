#pragma once

#include <array>
#include <iosfwd>
#include <string_view>
#include <utility>
#include <vector>

#include "engrave/core.h"

namespace engrave {

enum class Relation : std::uint8_t {
  kOnset = 0,
  kDuring,
  kFollow,
  kSilence,
  kOnsetInv,
  kDuringInv,
  kFollowInv,
  kSilenceInv,
};
inline constexpr int kNumRelations = 8;

std::string_view relation_name(Relation r);

struct Edge {
  int src = 0;
  int dst = 0;
  auto operator<=>(const Edge&) const = default;
};

using NotePair = std::pair<int, int>;

struct CandidateOptions {
  // Adds (u, w) where w sits on the downbeat of the bar after u's bar.
  bool cross_bar = true;
};

// Heterogeneous score graph. Node index == note id.
struct ScoreGraph {
  int node_count = 0;
  std::array<std::vector<Edge>, kNumRelations> edges;
  std::vector<std::array<double, kNumFeatures>> features;  // row per note id
  std::vector<NotePair> candidate_pairs;  // voice candidates, ordered (u, w)
  std::vector<NotePair> chord_candidates;  // same-onset pairs, u before w
  std::vector<int> note_order;  // ids sorted by (onset, pitch, id)

  const std::vector<Edge>& relation(Relation r) const {
    return edges[static_cast<int>(r)];
  }
  std::size_t edge_count() const;
};

ScoreGraph build_graph(const Score& score, CandidateOptions options = {});

// Voice candidate set: same-bar pairs with offset(u) <= onset(w), plus
// cross-bar continuation pairs when enabled. Sorted by note_order rank.
std::vector<NotePair> candidate_pairs(const Score& score, CandidateOptions options = {});

// Unordered same-onset pairs, (u, w) with u ranked first in note order.
std::vector<NotePair> chord_candidate_pairs(const Score& score);

struct CoverageReport {
  std::size_t true_edges = 0;
  std::size_t covered = 0;
  std::vector<NotePair> missing;
  double fraction() const {
    return true_edges == 0 ? 1.0 : static_cast<double>(covered) / true_edges;
  }
};

// Fraction of ground-truth voice edges that appear in the candidate set.
CoverageReport candidate_coverage(const std::vector<NotePair>& truth,
                                  const std::vector<NotePair>& candidates);

// One JSON object per line: {"relation": ..., "src": ..., "dst": ...}.
void dump_graph_jsonl(const ScoreGraph& graph, std::ostream& out);

}  // namespace engrave
