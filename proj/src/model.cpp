#include "engrave/model.h"

#include "engrave/error.h"

namespace engrave {

void ModelConfig::validate() const {
  encoder.validate();
  if (head_hidden < 0) throw Error(ErrorCode::kBadConfig, "head hidden size must be >= 0");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"encoder", encoder.to_json()},
          {"head_hidden", effective_head_hidden()},
          {"cross_bar_candidates", candidates.cross_bar}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.encoder = EncoderConfig::from_json(j.at("encoder"));
    c.head_hidden = j.at("head_hidden").get<int>();
    c.candidates.cross_bar = j.at("cross_bar_candidates").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadConfig, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.validate();
  ad::Rng rng(seed);
  encoder_ = EncoderParams::init(config_.encoder, rng);
  heads_ = HeadParams::init(config_.encoder.hidden_size, config_.effective_head_hidden(), rng);
  encoder_.collect(params_);
  heads_.collect(params_);
}

HeadOutputs Model::forward(const ScoreGraph& graph, ad::Rng& rng, bool train) const {
  const ad::Value h = encode(graph, encoder_, config_.encoder, rng, train);
  return run_heads(h, graph, heads_);
}

PredictionBundle Model::predict(const ScoreGraph& graph) const {
  ad::NoGradGuard guard;
  ad::Rng unused(0);
  return to_bundle(forward(graph, unused, false), graph);
}

}  // namespace engrave
