#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "engrave/error.h"
#include "engrave/musicxml.h"
#include "engrave/pipeline.h"
#include "engrave/prediction_io.h"
#include "engrave/synthetic.h"
#include "helpers.h"

using namespace engrave;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kBadConfig;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("engrave_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("run config keys, values and text echo") {
  RunConfig c;
  CHECK(code_of([&] { c.set("bogus", "1"); }) == ErrorCode::kBadConfig);
  CHECK(code_of([&] { c.set("lr", "fast"); }) == ErrorCode::kBadConfig);
  CHECK(code_of([&] { c.set("use_gru", "maybe"); }) == ErrorCode::kBadConfig);
  c.set("lr", "0.003");
  c.set("aggregation", "mean");
  c.set("threshold", "0.4");
  CHECK(c.get("lr") == "0.003");
  CHECK(c.train.model.encoder.aggregation == Aggregation::kMean);
  CHECK(c.post.voice_threshold == 0.4);

  const fs::path dir = scratch_dir("config");
  const fs::path file = dir / "run.ini";
  std::ofstream(file) << c.to_text();
  RunConfig back;
  back.load_file(file.string());
  CHECK(back.to_text() == c.to_text());
  CHECK(code_of([&] { back.load_file((dir / "missing.ini").string()); }) == ErrorCode::kMissingInput);
  std::ofstream(dir / "sections.ini") << "[train]\nlr = 1\n";
  CHECK(code_of([&] { back.load_file((dir / "sections.ini").string()); }) == ErrorCode::kBadConfig);
}

TEST_CASE("overlay applies only explicit training keys") {
  TrainConfig base;
  base.model.encoder.hidden_size = 32;
  base.lr = 0.01;
  RunConfig c;
  c.set("hidden_size", "64");
  c.explicit_keys = {"hidden_size", "threshold"};
  const TrainConfig merged = c.overlay(base);
  CHECK(merged.model.encoder.hidden_size == 64);
  CHECK(merged.lr == 0.01);
  CHECK(config_hash(merged.to_json()) != config_hash(base.to_json()));
  RunConfig none;
  CHECK(config_hash(none.overlay(base).to_json()) == config_hash(base.to_json()));
}

TEST_CASE("manifest splits are deterministic and roughly proportional") {
  int test = 0, validation = 0;
  for (int i = 0; i < 2000; ++i) {
    const std::string name = "piece_" + std::to_string(i) + ".musicxml";
    const std::string s = split_for(name, 7);
    CHECK(s == split_for(name, 7));
    test += s == "test";
    validation += s == "validation";
  }
  CHECK(test > 300);
  CHECK(test < 500);
  CHECK(validation > 100);
  CHECK(validation < 230);

  const Manifest m = ingest(fixture("samples"), 0);
  CHECK(m.entries.size() == 4);
  const Manifest back = Manifest::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
  for (const auto& e : m.entries) CHECK(e.split != "rejected");
}

TEST_CASE("rejected files are listed with their category") {
  const fs::path dir = scratch_dir("ingest");
  std::ofstream(dir / "broken.musicxml") << "<score-partwise><part>";
  fs::copy_file(fixture("samples/one_note.musicxml"), dir / "fine.musicxml");
  const Manifest m = ingest(dir.string(), 0);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].split == "rejected");
  CHECK(m.entries[0].error == "MalformedXml");
  CHECK(m.entries[1].split != "rejected");
}

TEST_CASE("prediction dumps round trip exactly") {
  ad::Rng rng(3);
  const Score s = random_labeled_score(rng);
  const ScoreGraph g = build_graph(s);
  ModelConfig mc;
  mc.encoder.hidden_size = 8;
  const Model m(mc, 1);
  const PredictionBundle b = m.predict(g);
  const std::string dump = prediction_dump_string(s, b);
  std::istringstream in(dump);
  const PredictionDump back = read_prediction_dump(in);
  CHECK(back.bundle.node_logits == b.node_logits);
  CHECK(back.bundle.voice_prob == b.voice_prob);
  CHECK(back.bundle.voice_pairs == b.voice_pairs);
  CHECK(back.bundle.chord_prob == b.chord_prob);
  CHECK(back.score.notes == s.notes);
  CHECK(prediction_dump_string(back.score, back.bundle) == dump);

  std::istringstream empty("");
  CHECK(code_of([&] { read_prediction_dump(empty); }) == ErrorCode::kMissingInput);
  // Drop one note record.
  std::istringstream lines(dump);
  std::string line, cut;
  bool dropped = false;
  while (std::getline(lines, line)) {
    if (!dropped && line.find("\"record\":\"note\"") != std::string::npos) {
      dropped = true;
      continue;
    }
    cut += line + "\n";
  }
  REQUIRE(dropped);
  std::istringstream truncated(cut);
  CHECK(code_of([&] { read_prediction_dump(truncated); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("prediction produces valid MusicXML and oracle evaluation is perfect") {
  const auto examples = load_examples(expand_inputs({fixture("corpus")}), {});
  REQUIRE(examples.size() == 2);
  ModelConfig mc;
  mc.encoder.hidden_size = 8;
  const Model m(mc, 2);
  const Prediction p = predict_score(m, examples[0].score, {});
  CHECK(validate_musicxml(p.musicxml).empty());
  CHECK(parse_musicxml(p.musicxml).score.notes == examples[0].score.notes);

  const CorpusReport oracle = evaluate_corpus(nullptr, examples, {});
  CHECK(oracle.micro.voice.f1() == 1.0);
  CHECK(oracle.micro.chord.f1() == 1.0);
  for (const auto& h : oracle.micro.heads) CHECK(h.value() == 1.0);
}

TEST_CASE("input expansion") {
  CHECK(is_score_file("a.musicxml"));
  CHECK(is_score_file("a.mxl"));
  CHECK(is_score_file("a.musicxml.gz"));
  CHECK_FALSE(is_score_file("a.txt"));
  CHECK(expand_inputs({fixture("samples")}).size() == 4);
  CHECK(code_of([] { expand_inputs({"/no/such/path"}); }) == ErrorCode::kMissingInput);
}
