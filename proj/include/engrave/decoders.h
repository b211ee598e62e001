#pragma once

#include <array>
#include <vector>

#include "engrave/autodiff.h"
#include "engrave/core.h"
#include "engrave/graph.h"

namespace engrave {

// Two-layer perceptron on a node embedding: ReLU(h W1 + b1) W2 + b2.
struct NodeMlp {
  ad::Value w1, b1, w2, b2;
};

// Two-layer perceptron on a pair [h_u; h_w]; the first layer's weight is
// stored as its two row blocks so pair inputs are never materialized.
struct PairMlp {
  ad::Value w1_src, w1_dst, b1, w2, b2;
};

struct HeadParams {
  std::array<NodeMlp, kNumNodeHeads> node;
  PairMlp voice;
  PairMlp chord;

  static HeadParams init(int embedding_size, int hidden_size, ad::Rng& rng);
  void collect(ad::ParameterList& out) const;
  // Zeroes every output layer (W2, b2): all heads become uniform.
  void zero_output_layers();
};

// Taped head outputs: what the loss differentiates.
struct HeadOutputs {
  std::array<ad::Value, kNumNodeHeads> node_logits;  // N x width, row = note id
  ad::Value voice_logits;  // |candidate_pairs| x 1
  ad::Value chord_logits;  // |chord_candidates| x 1
};

HeadOutputs run_heads(const ad::Value& embeddings, const ScoreGraph& graph,
                      const HeadParams& params);

// Detached predictions, consumed by postprocessing and dumps.
struct PredictionBundle {
  std::array<ad::Matrix, kNumNodeHeads> node_logits;
  std::vector<NotePair> voice_pairs;
  std::vector<double> voice_prob;
  std::vector<NotePair> chord_pairs;
  std::vector<double> chord_prob;

  int note_count() const { return node_logits[0].rows; }
  const ad::Matrix& logits(NodeHead h) const { return node_logits[static_cast<int>(h)]; }
  ad::Matrix& logits(NodeHead h) { return node_logits[static_cast<int>(h)]; }
  // Softmax probability of the lower staff; the staff decision is s_v >= 0.5.
  double lower_staff_probability(int id) const;
  int argmax(NodeHead h, int id) const;
};

PredictionBundle to_bundle(const HeadOutputs& outputs, const ScoreGraph& graph);
PredictionBundle decode_all(const ad::Value& embeddings, const ScoreGraph& graph,
                            const HeadParams& params);

struct LossBreakdown {
  ad::Value total;
  std::array<double, kNumNodeHeads> node{};
  double voice = 0.0;
  double chord = 0.0;
  // Ground-truth voice edges outside the candidate set, left out of the loss.
  std::size_t excluded_voice_edges = 0;
};

// Unweighted sum of per-head mean cross-entropies plus mean BCE over the
// voice candidates and over the chord candidates. Throws LabelOutOfRange,
// NonFiniteLoss.
LossBreakdown total_loss(const HeadOutputs& outputs, const LabelSet& labels,
                         const ScoreGraph& graph);

// Voice/chord targets aligned with the graph's candidate lists.
std::vector<double> voice_targets(const LabelSet& labels, const ScoreGraph& graph,
                                  std::size_t* excluded = nullptr);
std::vector<double> chord_targets(const LabelSet& labels, const ScoreGraph& graph);

// Near-certain predictions that reproduce `labels` (oracle mode).
PredictionBundle bundle_from_labels(const LabelSet& labels, const ScoreGraph& graph);

}  // namespace engrave
