#pragma once

#include <cstdint>

#include <json.hpp>

#include "engrave/decoders.h"
#include "engrave/encoder.h"
#include "engrave/graph.h"

namespace engrave {

struct ModelConfig {
  EncoderConfig encoder;
  int head_hidden = 0;  // 0: same as the encoder hidden size
  CandidateOptions candidates;

  int effective_head_hidden() const { return head_hidden > 0 ? head_hidden : encoder.hidden_size; }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Encoder plus heads. Parameters are created once from the seed.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const ad::ParameterList& parameters() const { return params_; }
  EncoderParams& encoder() { return encoder_; }
  HeadParams& heads() { return heads_; }

  HeadOutputs forward(const ScoreGraph& graph, ad::Rng& rng, bool train) const;
  // Eval-mode predictions without recording a tape.
  PredictionBundle predict(const ScoreGraph& graph) const;

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  EncoderParams encoder_;
  HeadParams heads_;
  ad::ParameterList params_;
};

}  // namespace engrave
