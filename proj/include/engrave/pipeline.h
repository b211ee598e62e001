#pragma once

// Run configuration, dataset manifests and the composed stages behind each
// command: encode, decode, postprocess, export, evaluate.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "engrave/gradcheck.h"
#include "engrave/metrics.h"
#include "engrave/postprocess.h"
#include "engrave/trainer.h"

namespace engrave {

// Key-value run configuration. Keys use underscores; the matching command
// line flags use dashes.
struct RunConfig {
  TrainConfig train;
  PostprocessOptions post;
  std::string manifest;
  std::string checkpoint;
  std::string out_dir = "runs/latest";
  std::set<std::string> explicit_keys;  // keys set by a file or a flag

  static const std::vector<std::string>& keys();
  static bool is_training_key(const std::string& key);

  // Throws BadConfig on an unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  // Reads "key = value" lines ('#' and ';' start comments).
  void load_file(const std::string& path);
  // Every key, one "key = value" line each, in keys() order.
  std::string to_text() const;

  // `base` with every explicitly set training key applied on top.
  TrainConfig overlay(const TrainConfig& base) const;
};

struct ManifestEntry {
  std::string path;
  std::string split;  // train, validation, test or rejected
  std::size_t notes = 0;
  std::string error;  // error category for rejected files
};

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  std::vector<std::string> paths(const std::string& split) const;
  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
};

bool is_score_file(const std::string& path);
// Directories expand to their score files (sorted); files pass through.
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs);

// 20% test by a seeded hash of the file name; 10% of the rest validation by
// an unseeded hash of the file name.
std::string split_for(const std::string& file_name, std::uint64_t seed);
Manifest ingest(const std::string& dir, std::uint64_t seed);
Manifest read_manifest(const std::string& path);

std::vector<TrainExample> load_examples(const std::vector<std::string>& paths, CandidateOptions options);

struct Prediction {
  PredictionBundle bundle;
  EngravedScore engraved;
  std::string musicxml;
};

Prediction engrave_bundle(const PredictionBundle& bundle, const Score& score,
                          const PostprocessOptions& options);
Prediction predict_score(const Model& model, const Score& score, const PostprocessOptions& options);

// A null model evaluates ground-truth predictions (oracle mode).
CorpusReport evaluate_corpus(const Model* model, const std::vector<TrainExample>& examples,
                             const PostprocessOptions& options);

// Gradient check of the whole model and every head on a random labeled score.
ad::GradCheckReport model_grad_check(const ModelConfig& config, std::uint64_t seed, int notes,
                                     double tolerance);

}  // namespace engrave
