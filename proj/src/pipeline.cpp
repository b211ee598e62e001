#include "engrave/pipeline.h"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/spdlog.h>

#include "engrave/error.h"
#include "engrave/musicxml.h"
#include "engrave/synthetic.h"

namespace engrave {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::kBadConfig, "bad value '" + value + "' for " + key);
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value);
}

std::string format_double(double v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "seed",        "hidden_size",   "layers",        "head_hidden",
      "dropout",     "aggregation",   "gru_input",     "use_gru",
      "strict_same_bar_candidates",   "epochs",        "lr",
      "weight_decay", "decoupled_weight_decay",        "eval_every",
      "clip_norm",   "threshold",     "chord_threshold", "mean_lift",
      "manifest",    "checkpoint",    "out_dir"};
  return k;
}

bool RunConfig::is_training_key(const std::string& key) {
  static const std::set<std::string> runtime = {"threshold", "chord_threshold", "mean_lift",
                                                "manifest",  "checkpoint",      "out_dir"};
  return !runtime.contains(key);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  EncoderConfig& enc = train.model.encoder;
  if (key == "seed") train.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "hidden_size") enc.hidden_size = parse_int<int>(key, value);
  else if (key == "layers") enc.num_layers = parse_int<int>(key, value);
  else if (key == "head_hidden") train.model.head_hidden = parse_int<int>(key, value);
  else if (key == "dropout") enc.dropout_p = parse_double(key, value);
  else if (key == "aggregation") {
    if (value == "sum") enc.aggregation = Aggregation::kSum;
    else if (value == "mean") enc.aggregation = Aggregation::kMean;
    else bad_value(key, value);
  } else if (key == "gru_input") {
    if (value == "conv") enc.gru_input = GruInput::kConvOutput;
    else if (value == "initial") enc.gru_input = GruInput::kInitialFeatures;
    else bad_value(key, value);
  } else if (key == "use_gru") enc.use_gru = parse_bool(key, value);
  else if (key == "strict_same_bar_candidates") train.model.candidates.cross_bar = !parse_bool(key, value);
  else if (key == "epochs") train.epochs = parse_int<int>(key, value);
  else if (key == "lr") train.lr = parse_double(key, value);
  else if (key == "weight_decay") train.weight_decay = parse_double(key, value);
  else if (key == "decoupled_weight_decay") train.decoupled_weight_decay = parse_bool(key, value);
  else if (key == "eval_every") train.eval_every = parse_int<int>(key, value);
  else if (key == "clip_norm") train.clip_norm = parse_double(key, value);
  else if (key == "threshold") post.voice_threshold = parse_double(key, value);
  else if (key == "chord_threshold") post.chord_threshold = parse_double(key, value);
  else if (key == "mean_lift") post.mean_lift = parse_bool(key, value);
  else if (key == "manifest") manifest = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "out_dir") out_dir = value;
  else throw Error(ErrorCode::kBadConfig, "unknown config key '" + key + "'");
  if (post.voice_threshold <= 0.0 || post.voice_threshold >= 1.0 || post.chord_threshold < 0.0 ||
      post.chord_threshold > 1.0) {
    bad_value(key, value);
  }
  explicit_keys.insert(key);
}

std::string RunConfig::get(const std::string& key) const {
  const EncoderConfig& enc = train.model.encoder;
  if (key == "seed") return std::to_string(train.seed);
  if (key == "hidden_size") return std::to_string(enc.hidden_size);
  if (key == "layers") return std::to_string(enc.num_layers);
  if (key == "head_hidden") return std::to_string(train.model.head_hidden);
  if (key == "dropout") return format_double(enc.dropout_p);
  if (key == "aggregation") return enc.aggregation == Aggregation::kSum ? "sum" : "mean";
  if (key == "gru_input") return enc.gru_input == GruInput::kConvOutput ? "conv" : "initial";
  if (key == "use_gru") return format_bool(enc.use_gru);
  if (key == "strict_same_bar_candidates") return format_bool(!train.model.candidates.cross_bar);
  if (key == "epochs") return std::to_string(train.epochs);
  if (key == "lr") return format_double(train.lr);
  if (key == "weight_decay") return format_double(train.weight_decay);
  if (key == "decoupled_weight_decay") return format_bool(train.decoupled_weight_decay);
  if (key == "eval_every") return std::to_string(train.eval_every);
  if (key == "clip_norm") return format_double(train.clip_norm);
  if (key == "threshold") return format_double(post.voice_threshold);
  if (key == "chord_threshold") return format_double(post.chord_threshold);
  if (key == "mean_lift") return format_bool(post.mean_lift);
  if (key == "manifest") return manifest;
  if (key == "checkpoint") return checkpoint;
  if (key == "out_dir") return out_dir;
  throw Error(ErrorCode::kBadConfig, "unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kMissingInput, "config file " + path + " not found");
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kBadConfig, e.what());
  }
  for (const auto& [key, node] : tree) {
    if (!node.empty()) throw Error(ErrorCode::kBadConfig, "sections are not supported: [" + key + "]");
    set(key, node.data());
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& key : keys()) out += key + " = " + get(key) + "\n";
  return out;
}

TrainConfig RunConfig::overlay(const TrainConfig& base) const {
  RunConfig merged;
  merged.train = base;
  for (const auto& key : explicit_keys) {
    if (is_training_key(key)) merged.set(key, get(key));
  }
  return merged.train;
}

std::vector<std::string> Manifest::paths(const std::string& split) const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e.path);
  }
  return out;
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json f = {{"path", e.path}, {"split", e.split}, {"notes", e.notes}};
    if (!e.error.empty()) f["error"] = e.error;
    files.push_back(f);
  }
  return {{"seed", seed}, {"test_fraction", 0.2}, {"validation_fraction", 0.1}, {"files", files}};
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("files")) {
      ManifestEntry e;
      e.path = f.at("path").get<std::string>();
      e.split = f.at("split").get<std::string>();
      e.notes = f.value("notes", std::size_t{0});
      e.error = f.value("error", std::string());
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadConfig, std::string("manifest: ") + e.what());
  }
  return m;
}

bool is_score_file(const std::string& path) {
  const std::string name = fs::path(path).filename().string();
  for (const char* ext : {".musicxml", ".xml", ".mxl", ".musicxml.gz", ".xml.gz"}) {
    const std::string e = ext;
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0) return true;
  }
  return false;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && is_score_file(entry.path().string())) {
          found.push_back(entry.path().string());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(in)) {
      out.push_back(in);
    } else {
      throw Error(ErrorCode::kMissingInput, in + " does not exist");
    }
  }
  return out;
}

std::string split_for(const std::string& file_name, std::uint64_t seed) {
  std::string salt(8, '\0');
  for (int i = 0; i < 8; ++i) salt[i] = static_cast<char>((seed >> (8 * i)) & 0xff);
  if (fnv1a(file_name, fnv1a(salt)) % 100 < 20) return "test";
  return fnv1a(file_name) % 10 == 0 ? "validation" : "train";
}

Manifest ingest(const std::string& dir, std::uint64_t seed) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kMissingInput, dir + " is not a directory");
  Manifest m;
  m.seed = seed;
  for (const auto& path : expand_inputs({dir})) {
    ManifestEntry e;
    e.path = path;
    try {
      const ParseResult parsed = read_musicxml_file(path);
      e.notes = parsed.score.notes.size();
      e.split = e.notes == 0 ? "rejected" : split_for(fs::path(path).filename().string(), seed);
      if (e.notes == 0) e.error = std::string(error_code_name(ErrorCode::kEmptyScore));
    } catch (const Error& err) {
      e.split = "rejected";
      e.error = std::string(error_code_name(err.code()));
      spdlog::warn("{}: {} {}", path, e.error, err.what());
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingInput, "cannot open manifest " + path);
  try {
    return Manifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kBadConfig, std::string("manifest: ") + e.what());
  }
}

std::vector<TrainExample> load_examples(const std::vector<std::string>& paths, CandidateOptions options) {
  std::vector<TrainExample> out;
  for (const auto& path : paths) {
    ParseResult parsed = read_musicxml_file(path);
    if (parsed.score.notes.empty()) throw Error(ErrorCode::kEmptyScore, path + " has no notes");
    out.push_back(make_example(fs::path(path).filename().string(), std::move(parsed.score), options));
  }
  return out;
}

Prediction engrave_bundle(const PredictionBundle& bundle, const Score& score,
                          const PostprocessOptions& options) {
  Prediction p;
  p.bundle = bundle;
  p.engraved = postprocess(bundle, score, options);
  const auto problems = check_engraved(p.engraved);
  if (!problems.empty()) throw Error(ErrorCode::kInconsistentTiming, "engraved score: " + problems.front());
  p.musicxml = export_musicxml(p.engraved);
  return p;
}

Prediction predict_score(const Model& model, const Score& score, const PostprocessOptions& options) {
  if (score.notes.empty()) throw Error(ErrorCode::kEmptyScore, "score has no notes");
  const ScoreGraph graph = build_graph(score, model.config().candidates);
  return engrave_bundle(model.predict(graph), score, options);
}

CorpusReport evaluate_corpus(const Model* model, const std::vector<TrainExample>& examples,
                             const PostprocessOptions& options) {
  std::vector<EvalReport> pieces;
  for (const auto& ex : examples) {
    const PredictionBundle bundle = model ? model->predict(ex.graph) : bundle_from_labels(*ex.score.labels, ex.graph);
    const Prediction p = engrave_bundle(bundle, ex.score, options);
    EvalReport r = evaluate(ex.score, p.engraved, p.bundle, options.voice_threshold);
    r.name = ex.name;
    pieces.push_back(std::move(r));
  }
  return aggregate(std::move(pieces));
}

ad::GradCheckReport model_grad_check(const ModelConfig& config, std::uint64_t seed, int notes,
                                     double tolerance) {
  ad::Rng rng(seed);
  SyntheticOptions options;
  options.notes = notes;
  options.candidates = config.candidates;
  const Score score = random_labeled_score(rng, options);
  const ScoreGraph graph = build_graph(score, config.candidates);
  Model model(config, seed);
  auto loss_fn = [&] {
    ad::Rng dropout_rng(seed + 1);
    return total_loss(model.forward(graph, dropout_rng, true), *score.labels, graph).total;
  };
  return ad::grad_check(loss_fn, model.parameters(), tolerance);
}

}  // namespace engrave
