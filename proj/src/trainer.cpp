#include "engrave/trainer.h"

#include <cmath>
#include <cstdio>
#include <ostream>

#include <spdlog/spdlog.h>

#include "engrave/error.h"
#include "engrave/metrics.h"
#include "engrave/optim.h"

namespace engrave {

void TrainConfig::validate() const {
  model.validate();
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::kBadConfig, "lr must be >= 0");
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::kBadConfig, "weight decay must be >= 0");
  if (epochs < 1) throw Error(ErrorCode::kBadConfig, "epochs must be >= 1");
  if (eval_every < 1) throw Error(ErrorCode::kBadConfig, "eval_every must be >= 1");
  if (!(clip_norm >= 0.0)) throw Error(ErrorCode::kBadConfig, "clip norm must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"model", model.to_json()},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"decoupled_weight_decay", decoupled_weight_decay},
          {"epochs", epochs},
          {"seed", seed},
          {"eval_every", eval_every},
          {"clip_norm", clip_norm}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.model = ModelConfig::from_json(j.at("model"));
    c.lr = j.at("lr").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.decoupled_weight_decay = j.at("decoupled_weight_decay").get<bool>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.eval_every = j.at("eval_every").get<int>();
    c.clip_norm = j.at("clip_norm").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadConfig, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainExample make_example(std::string name, Score score, CandidateOptions options) {
  if (!score.labels) throw Error(ErrorCode::kMissingInput, name + ": score has no labels");
  ScoreGraph graph = build_graph(score, options);
  return {std::move(name), std::move(score), std::move(graph)};
}

double evaluate_loss(const Model& model, const std::vector<TrainExample>& examples) {
  if (examples.empty()) return kNotMeasured;
  ad::NoGradGuard guard;
  ad::Rng unused(0);
  double total = 0.0;
  for (const auto& ex : examples) {
    total += total_loss(model.forward(ex.graph, unused, false), *ex.score.labels, ex.graph).total.item();
  }
  return total / static_cast<double>(examples.size());
}

namespace {

void validation_metrics(const Model& model, const std::vector<TrainExample>& examples, EpochLog& log) {
  Count heads;
  Prf voice;
  for (const auto& ex : examples) {
    const PredictionBundle b = model.predict(ex.graph);
    const LabelSet& t = *ex.score.labels;
    for (NodeHead h : kAllNodeHeads) {
      for (int i = 0; i < b.note_count(); ++i) {
        heads.correct += b.argmax(h, i) == label_class(t.notes[i], h);
        ++heads.total;
      }
    }
    std::vector<NotePair> raw;
    for (std::size_t i = 0; i < b.voice_pairs.size(); ++i) {
      if (b.voice_prob[i] > 0.5) raw.push_back(b.voice_pairs[i]);
    }
    voice += edge_f1(raw, t.voice_edges);
  }
  log.val_accuracy = heads.value();
  log.val_voice_f1 = voice.f1();
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& validation_set, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorCode::kEmptyCorpus, "no training pieces");

  Model model(config.model, config.seed);
  ad::AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.weight_decay = config.weight_decay;
  adam_config.decoupled_weight_decay = config.decoupled_weight_decay;
  ad::Adam adam(model.parameters(), adam_config);
  ad::Rng rng(config.seed ^ 0x9E3779B97F4A7C15ULL);

  TrainResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::string, ad::Matrix>> best_tensors;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t idx : order) {
      const TrainExample& ex = train_set[idx];
      ad::zero_grads(model.parameters());
      LossBreakdown loss;
      try {
        loss = total_loss(model.forward(ex.graph, rng, true), *ex.score.labels, ex.graph);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFiniteLoss) throw;
        throw Error(ErrorCode::kDivergedLoss, "epoch " + std::to_string(epoch) + ", " + ex.name + ": " + e.what());
      }
      loss.total.backward();
      if (config.clip_norm > 0.0) ad::clip_grad_norm(model.parameters(), config.clip_norm);
      adam.step(model.parameters());
      log.train_loss += loss.total.item();
      for (int h = 0; h < kNumNodeHeads; ++h) log.head_loss[h] += loss.node[h];
      log.voice_loss += loss.voice;
      log.chord_loss += loss.chord;
    }
    const double n = static_cast<double>(train_set.size());
    log.train_loss /= n;
    for (double& h : log.head_loss) h /= n;
    log.voice_loss /= n;
    log.chord_loss /= n;

    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      log.eval_loss = evaluate_loss(model, train_set);
      if (!std::isfinite(log.eval_loss)) {
        throw Error(ErrorCode::kDivergedLoss, "epoch " + std::to_string(epoch) + ": non-finite loss");
      }
      double selection = log.eval_loss;
      if (!validation_set.empty()) {
        log.val_loss = evaluate_loss(model, validation_set);
        validation_metrics(model, validation_set, log);
        selection = log.val_loss;
      }
      if (selection < result.best_loss) {
        result.best_loss = selection;
        result.best_epoch = epoch;
        best_tensors = snapshot_parameters(model.parameters());
        log.best = true;
      }
    }
    spdlog::debug("epoch {} train {:.6f} eval {:.6f} val {:.6f}", epoch, log.train_loss, log.eval_loss,
                  log.val_loss);
    if (on_epoch) on_epoch(log);
    result.log.push_back(log);
  }

  result.checkpoint = make_checkpoint(model, config, {{"best_epoch", result.best_epoch},
                                                      {"best_loss", result.best_loss}});
  result.checkpoint.tensors = std::move(best_tensors);
  return result;
}

void write_metrics_csv(const std::vector<EpochLog>& log, std::ostream& out) {
  out << "epoch,train_loss";
  for (NodeHead h : kAllNodeHeads) out << ",loss_" << node_head_name(h);
  out << ",loss_voice,loss_chord,eval_loss,val_loss,val_accuracy,val_voice_f1,best\n";
  char buf[32];
  auto num = [&](double v) {
    if (std::isnan(v)) {
      out << ',';
      return;
    }
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out << buf;
  };
  for (const auto& e : log) {
    out << e.epoch;
    num(e.train_loss);
    for (double h : e.head_loss) num(h);
    num(e.voice_loss);
    num(e.chord_loss);
    num(e.eval_loss);
    num(e.val_loss);
    num(e.val_accuracy);
    num(e.val_voice_f1);
    out << ',' << (e.best ? 1 : 0) << '\n';
  }
}

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, nlohmann::json metadata) {
  Checkpoint c;
  c.config = config.to_json();
  c.metadata = std::move(metadata);
  c.seed = config.seed;
  c.config_hash = config_hash(c.config);
  c.tensors = snapshot_parameters(model.parameters());
  return c;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  const TrainConfig config = TrainConfig::from_json(ckpt.config);
  Model model(config.model, config.seed);
  restore_parameters(ckpt, model.parameters());
  return model;
}

}  // namespace engrave
