// Command-line entry point: ingest, train, predict, engrave, eval, gradcheck,
// graph-dump. Failures print one line "ERROR <Category> <message>" to stderr.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "engrave/checkpoint.h"
#include "engrave/error.h"
#include "engrave/musicxml.h"
#include "engrave/pipeline.h"
#include "engrave/prediction_io.h"

namespace fs = std::filesystem;
using namespace engrave;

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> seed, hidden_size, layers, epochs, lr, weight_decay, threshold, out_dir,
      checkpoint;
  bool strict = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value run configuration file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--hidden-size", f.hidden_size, "encoder hidden size");
  cmd->add_option("--layers", f.layers, "number of hybrid encoder layers");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--weight-decay", f.weight_decay, "Adam weight decay");
  cmd->add_option("--threshold", f.threshold, "voice link probability threshold");
  cmd->add_flag("--strict-same-bar-candidates", f.strict, "voice candidates within one bar only");
  cmd->add_option("--out-dir", f.out_dir, "run directory for all artifacts");
}

RunConfig effective_config(const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg.load_file(f.config);
  auto apply = [&](const char* key, const std::optional<std::string>& v) {
    if (v) cfg.set(key, *v);
  };
  apply("seed", f.seed);
  apply("hidden_size", f.hidden_size);
  apply("layers", f.layers);
  apply("epochs", f.epochs);
  apply("lr", f.lr);
  apply("weight_decay", f.weight_decay);
  apply("threshold", f.threshold);
  apply("out_dir", f.out_dir);
  apply("checkpoint", f.checkpoint);
  if (f.strict) cfg.set("strict_same_bar_candidates", "true");
  return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kMissingInput, "cannot create " + dir.string() + ": " + ec.message());
  std::ofstream(dir / "config.ini") << cfg.to_text();
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kMissingInput, "cannot write " + path.string());
  out << text;
}

std::string stem_of(const std::string& path) {
  std::string name = fs::path(path).filename().string();
  for (const char* ext : {".musicxml.gz", ".xml.gz", ".musicxml", ".xml", ".mxl", ".jsonl"}) {
    const std::string e = ext;
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0) {
      return name.substr(0, name.size() - e.size());
    }
  }
  return name;
}

bool is_manifest(const std::string& path) {
  return path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

// Loads the checkpoint and checks that every explicitly configured training
// key agrees with the configuration it was trained under.
Model load_model(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw Error(ErrorCode::kMissingInput, "no checkpoint given (--checkpoint)");
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  const TrainConfig trained = TrainConfig::from_json(ckpt.config);
  const TrainConfig runtime = cfg.overlay(trained);
  if (config_hash(runtime.to_json()) != ckpt.config_hash) {
    throw Error(ErrorCode::kChecksumMismatch,
                "runtime configuration differs from the checkpoint's (hash " + ckpt.config_hash + ")");
  }
  return model_from_checkpoint(ckpt);
}

int cmd_ingest(const RunConfig& cfg, const std::string& dir) {
  const Manifest m = ingest(dir, cfg.train.seed);
  const fs::path out = prepare_out_dir(cfg);
  write_file(out / "manifest.json", m.to_json().dump(2) + "\n");
  std::cout << "train " << m.paths("train").size() << " validation " << m.paths("validation").size()
            << " test " << m.paths("test").size() << " rejected " << m.paths("rejected").size() << "\n"
            << (out / "manifest.json").string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::vector<std::string>& inputs) {
  std::vector<std::string> train_paths, val_paths;
  std::vector<std::string> plain;
  for (const auto& in : inputs) {
    if (is_manifest(in)) {
      const Manifest m = read_manifest(in);
      for (const auto& p : m.paths("train")) train_paths.push_back(p);
      for (const auto& p : m.paths("validation")) val_paths.push_back(p);
    } else {
      plain.push_back(in);
    }
  }
  for (const auto& p : expand_inputs(plain)) train_paths.push_back(p);
  const CandidateOptions cand = cfg.train.model.candidates;
  const auto train_set = load_examples(train_paths, cand);
  const auto val_set = load_examples(val_paths, cand);
  const fs::path out = prepare_out_dir(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = train(cfg.train, train_set, val_set, [](const EpochLog& e) {
    spdlog::info("epoch {} loss {:.6f} eval {:.6f}", e.epoch, e.train_loss, e.eval_loss);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_checkpoint(result.checkpoint, (out / "checkpoint.ckpt").string());
  std::ofstream csv(out / "metrics.csv");
  write_metrics_csv(result.log, csv);
  std::cout << "pieces " << train_set.size() << " validation " << val_set.size() << " best_epoch "
            << result.best_epoch << " best_loss " << result.best_loss << " seconds " << secs << "\n"
            << (out / "checkpoint.ckpt").string() << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, const std::string& file) {
  const Model model = load_model(cfg);
  const ParseResult parsed = read_musicxml_file(file);
  const Prediction p = predict_score(model, parsed.score, cfg.post);
  const fs::path out = prepare_out_dir(cfg);
  const std::string stem = stem_of(file);
  write_file(out / (stem + ".predictions.jsonl"), prediction_dump_string(parsed.score, p.bundle));
  write_file(out / (stem + ".musicxml"), p.musicxml);
  std::cout << (out / (stem + ".musicxml")).string() << "\n";
  return 0;
}

int cmd_engrave(const RunConfig& cfg, const std::string& dump_path) {
  const PredictionDump dump = read_prediction_dump_file(dump_path);
  const Prediction p = engrave_bundle(dump.bundle, dump.score, cfg.post);
  const fs::path out = prepare_out_dir(cfg);
  std::string stem = stem_of(dump_path);
  if (stem.size() > 12 && stem.ends_with(".predictions")) stem.resize(stem.size() - 12);
  write_file(out / (stem + ".musicxml"), p.musicxml);
  std::cout << (out / (stem + ".musicxml")).string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::vector<std::string>& inputs, bool oracle) {
  std::vector<std::string> paths, plain;
  for (const auto& in : inputs) {
    if (is_manifest(in)) {
      for (const auto& p : read_manifest(in).paths("test")) paths.push_back(p);
    } else {
      plain.push_back(in);
    }
  }
  for (const auto& p : expand_inputs(plain)) paths.push_back(p);
  std::optional<Model> model;
  CandidateOptions cand = cfg.train.model.candidates;
  if (!oracle) {
    model.emplace(load_model(cfg));
    cand = model->config().candidates;
  }
  const auto examples = load_examples(paths, cand);
  const CorpusReport report = evaluate_corpus(model ? &*model : nullptr, examples, cfg.post);
  const fs::path out = prepare_out_dir(cfg);
  write_file(out / "eval.json", report.to_json().dump(2) + "\n");
  std::cout << format_table(report);
  return 0;
}

int cmd_gradcheck(RunConfig cfg, int notes) {
  if (!cfg.explicit_keys.contains("hidden_size")) cfg.train.model.encoder.hidden_size = 16;
  const auto t0 = std::chrono::steady_clock::now();
  const ad::GradCheckReport r = model_grad_check(cfg.train.model, cfg.train.seed, notes, 1e-4);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : r.params) {
    params.push_back({{"name", p.name}, {"entries", p.entries}, {"max_rel_error", p.max_rel_error},
                      {"max_abs_error", p.max_abs_error}, {"nonsmooth", p.nonsmooth}});
  }
  const fs::path out = prepare_out_dir(cfg);
  write_file(out / "gradcheck.json",
             nlohmann::json{{"max_rel_error", r.max_rel_error}, {"tolerance", r.tolerance},
                            {"passed", r.passed}, {"nonsmooth", r.nonsmooth}, {"seconds", secs},
                            {"params", params}}
                     .dump(2) +
                 "\n");
  std::cout << (r.passed ? "PASS" : "FAIL") << " max_rel_error " << r.max_rel_error << " tolerance "
            << r.tolerance << " nonsmooth " << r.nonsmooth << " seconds " << secs << "\n";
  return r.passed ? 0 : 1;
}

int cmd_graph_dump(const RunConfig& cfg, const std::string& file) {
  const ParseResult parsed = read_musicxml_file(file);
  const CandidateOptions cand = cfg.train.model.candidates;
  const ScoreGraph graph = build_graph(parsed.score, cand);
  const fs::path out = prepare_out_dir(cfg);
  std::ofstream jsonl(out / (stem_of(file) + ".graph.jsonl"));
  dump_graph_jsonl(graph, jsonl);
  const auto& truth = parsed.score.labels->voice_edges;
  const CoverageReport wide = candidate_coverage(truth, candidate_pairs(parsed.score, {true}));
  const CoverageReport strict = candidate_coverage(truth, candidate_pairs(parsed.score, {false}));
  std::cout << "nodes " << graph.node_count << " edges " << graph.edge_count() << " candidates "
            << graph.candidate_pairs.size() << " coverage_cross_bar " << wide.fraction()
            << " coverage_strict " << strict.fraction() << " strict_missing " << strict.missing.size()
            << "\n"
            << (out / (stem_of(file) + ".graph.jsonl")).string() << "\n";
  return 0;
}

void fail_line(std::string_view category, const std::string& message) {
  std::string one = message;
  for (char& c : one) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "ERROR " << category << " " << one << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("engrave");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("ENGRAVE_LOG")) spdlog::cfg::helpers::load_levels(level);

  CLI::App app{"Piano score engraving with a hybrid graph network"};
  app.require_subcommand(1);
  Flags flags;
  std::string dir, file;
  std::vector<std::string> inputs;
  bool oracle = false;
  int notes = 10;

  auto* ingest_cmd = app.add_subcommand("ingest", "scan a directory into a dataset manifest");
  ingest_cmd->add_option("dir", dir, "directory of score files")->required();
  auto* train_cmd = app.add_subcommand("train", "train on a manifest or score files");
  train_cmd->add_option("inputs", inputs, "manifest .json, score files or directories")->required();
  auto* predict_cmd = app.add_subcommand("predict", "engrave a score with a trained model");
  predict_cmd->add_option("file", file, "input score")->required();
  auto* engrave_cmd = app.add_subcommand("engrave", "postprocess a prediction dump into MusicXML");
  engrave_cmd->add_option("dump", file, "prediction JSON-lines dump")->required();
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model against ground truth");
  eval_cmd->add_option("inputs", inputs, "manifest .json (test split), score files or directories")->required();
  eval_cmd->add_flag("--oracle", oracle, "evaluate ground-truth predictions instead of a model");
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of the full model");
  gradcheck_cmd->add_option("--notes", notes, "notes in the random test score");
  auto* graph_cmd = app.add_subcommand("graph-dump", "write the score graph as JSON lines");
  graph_cmd->add_option("file", file, "input score")->required();

  for (auto* cmd : {ingest_cmd, train_cmd, predict_cmd, engrave_cmd, eval_cmd, gradcheck_cmd, graph_cmd}) {
    add_common(cmd, flags);
  }
  for (auto* cmd : {predict_cmd, eval_cmd}) cmd->add_option("--checkpoint", flags.checkpoint, "checkpoint file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail_line(error_code_name(ErrorCode::kBadConfig), e.what());
    return 2;
  }

  try {
    const RunConfig cfg = effective_config(flags);
    if (*ingest_cmd) return cmd_ingest(cfg, dir);
    if (*train_cmd) return cmd_train(cfg, inputs);
    if (*predict_cmd) return cmd_predict(cfg, file);
    if (*engrave_cmd) return cmd_engrave(cfg, file);
    if (*eval_cmd) return cmd_eval(cfg, inputs, oracle);
    if (*gradcheck_cmd) return cmd_gradcheck(cfg, notes);
    if (*graph_cmd) return cmd_graph_dump(cfg, file);
  } catch (const Error& e) {
    fail_line(error_code_name(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    fail_line("Internal", e.what());
    return 1;
  }
  return 0;
}
