#pragma once

// Turns per-note predictions into an engraved score: chord pooling, voice
// linking by linear assignment, unpooling, label smoothing, rest infilling.

#include <array>
#include <vector>

#include "engrave/core.h"
#include "engrave/decoders.h"
#include "engrave/engraved.h"
#include "engrave/graph.h"

namespace engrave {

struct PostprocessOptions {
  double chord_threshold = 0.5;
  double voice_threshold = 0.5;
  // Probability between two pooled nodes: max over member pairs, or the mean
  // over all member pairs (absent pairs count as 0).
  bool mean_lift = false;
};

class UnionFind {
 public:
  explicit UnionFind(int n);
  int find(int x);
  void unite(int a, int b);

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

// Component label per element: the smallest element of its component.
std::vector<int> connected_components(int n, const std::vector<NotePair>& edges);

struct Assignment {
  std::vector<int> col_of_row;  // -1 for rows left unmatched (rows > cols)
  double cost = 0.0;
};

// Minimum-cost assignment on a rectangular cost matrix (O(n^2 m)). Every
// row is matched when rows <= cols, every column otherwise.
Assignment hungarian(const std::vector<std::vector<double>>& cost);

struct PooledNode {
  std::vector<int> members;  // note ids by ascending pitch
  Tick onset = 0;
  Tick duration = 0;
  Staff staff = Staff::kUpper;
  int bar = 0;
  // Member-averaged logits for note_type, dots, tuplet, stem and key.
  std::array<std::vector<double>, kNumNodeHeads> logits;

  Tick offset() const { return onset + duration; }
  int argmax(NodeHead h) const;
};

inline constexpr std::array<NodeHead, 5> kPooledHeads = {
    NodeHead::kNoteType, NodeHead::kDots, NodeHead::kTuplet, NodeHead::kStem, NodeHead::kKey};

// Pools sorted by (onset, lowest member pitch).
std::vector<PooledNode> pool_chords(const PredictionBundle& bundle, const Score& score,
                                    double threshold = 0.5);

// Probability that pool `b` directly follows pool `a` in a voice.
double lifted_probability(const PooledNode& a, const PooledNode& b,
                          const std::vector<std::vector<std::pair<int, double>>>& successors,
                          bool mean_lift);

// Voice streams as ordered lists of pool indices. Each staff is swept one
// onset group at a time; open voice ends are matched to the group's pools.
std::vector<std::vector<int>> assign_voices(const std::vector<PooledNode>& pools,
                                            const PredictionBundle& bundle,
                                            const PostprocessOptions& options = {});

std::vector<std::vector<int>> assign_voices(const std::vector<PooledNode>& pools,
                                            const PredictionBundle& bundle, double threshold);

EngravedScore unpool_and_finalize(const std::vector<std::vector<int>>& streams,
                                  const std::vector<PooledNode>& pools,
                                  const PredictionBundle& bundle, const Score& score);

EngravedScore postprocess(const PredictionBundle& bundle, const Score& score,
                          const PostprocessOptions& options = {});

// Engraves a score exactly as its ground-truth labels describe it.
EngravedScore engrave_from_labels(const Score& score);

// Assembles voices, rests, clef regions and octave brackets. `streams` lists
// each voice as a sequence of chords (note ids); `labels` are final.
EngravedScore assemble_engraved(const Score& score, LabelSet labels,
                                const std::vector<std::vector<std::vector<int>>>& streams,
                                std::vector<int> measure_keys);

// Rest events covering [from, to) inside the bar starting at bar_onset.
// Greedy over the rest vocabulary, longest first, preferring rests that
// start on a multiple of their own length. Throws UnfillableGap.
std::vector<EngravedEvent> fill_rests(Tick from, Tick to, Tick bar_onset, int divisions);

// Per-measure key: majority of note keys; ties go to the previous measure's
// key when it is among them, else the smallest fifths value. Empty measures
// repeat the previous key (leading ones take the first voted key).
std::vector<int> vote_measure_keys(const Score& score, const std::vector<int>& note_keys);

// Window-3 majority filter with replicated edges, iterated until stable.
std::vector<int> smooth_labels(std::vector<int> values);

}  // namespace engrave
