#pragma once

// End-to-end optimization: one Adam step per piece (full-graph batch), pieces
// shuffled per epoch, best checkpoint kept by validation loss.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "engrave/checkpoint.h"
#include "engrave/model.h"

namespace engrave {

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  double weight_decay = 5e-4;
  bool decoupled_weight_decay = true;
  int epochs = 100;
  std::uint64_t seed = 0;
  int eval_every = 1;
  double clip_norm = 0.0;  // 0 disables clipping

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainExample {
  std::string name;
  Score score;  // with labels
  ScoreGraph graph;
};

TrainExample make_example(std::string name, Score score, CandidateOptions options);

inline constexpr double kNotMeasured = std::numeric_limits<double>::quiet_NaN();

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean step loss with dropout active
  std::array<double, kNumNodeHeads> head_loss{};
  double voice_loss = 0.0;
  double chord_loss = 0.0;
  double eval_loss = kNotMeasured;  // training set, dropout off, after the epoch
  double val_loss = kNotMeasured;
  double val_accuracy = kNotMeasured;  // mean node-head argmax accuracy
  double val_voice_f1 = kNotMeasured;  // thresholded voice probabilities
  bool best = false;
};

struct TrainResult {
  Checkpoint checkpoint;  // best epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Throws EmptyCorpus, DivergedLoss, BadConfig.
TrainResult train(const TrainConfig& config, const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& validation_set, const EpochCallback& on_epoch = {});

// Eval-mode mean total loss over the examples.
double evaluate_loss(const Model& model, const std::vector<TrainExample>& examples);

void write_metrics_csv(const std::vector<EpochLog>& log, std::ostream& out);

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config,
                           nlohmann::json metadata = nlohmann::json::object());
// Rebuilds the model the checkpoint's config describes and loads its tensors.
Model model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace engrave
