#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "engrave/autodiff.h"
#include "engrave/graph.h"

namespace engrave {

enum class Aggregation { kSum, kMean };

// Which sequence the per-layer GRU consumes: that layer's (dropped-out)
// convolution output, or the projected input features h^(0) with the GRU
// output added to the convolution output.
enum class GruInput { kConvOutput, kInitialFeatures };

struct EncoderConfig {
  int num_layers = 3;
  int hidden_size = 256;
  double dropout_p = 0.5;
  Aggregation aggregation = Aggregation::kSum;
  GruInput gru_input = GruInput::kConvOutput;
  bool use_gru = true;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

struct GruParams {
  ad::Value w_input;   // H x 3H, gate order [reset | update | candidate]
  ad::Value b_input;   // 1 x 3H
  ad::Value w_hidden;  // H x 3H
  ad::Value ln_gain;   // 1 x 3H, normalizes the hidden projection
  ad::Value ln_bias;   // 1 x 3H
};

struct EncoderLayer {
  ad::Value self_weight;  // H x H
  std::array<ad::Value, kNumRelations> relation_weights;  // H x H each
  GruParams gru;
  ad::Value norm_gain;  // 1 x H, applied to the block output
  ad::Value norm_bias;
};

struct EncoderParams {
  ad::Value input_weight;  // kNumFeatures x H
  ad::Value input_bias;    // 1 x H
  std::vector<EncoderLayer> layers;

  static EncoderParams init(const EncoderConfig& config, ad::Rng& rng);
  void collect(ad::ParameterList& out) const;
};

ad::Value feature_matrix(const ScoreGraph& graph);

// ReLU(h W0 + sum_r sum_{v in N_r(u)} h_v W_r) for every node u.
ad::Value hetero_sage_conv(const ad::Value& h, const ScoreGraph& graph, const EncoderLayer& layer,
                           Aggregation aggregation);

// Runs a layer-normalized GRU over the rows of `x` (indexed by note id) in
// `order`, from a zero initial state. Returns each node's hidden state,
// indexed by note id.
ad::Value gru_sweep(const ad::Value& x, const std::vector<int>& order, const GruParams& gru);

// Full hybrid encoder; returns node_count x hidden_size embeddings.
ad::Value encode(const ScoreGraph& graph, const EncoderParams& params,
                 const EncoderConfig& config, ad::Rng& rng, bool train);

}  // namespace engrave
