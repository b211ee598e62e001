#include <doctest.h>

#include <cmath>
#include <sstream>

#include "engrave/error.h"
#include "engrave/pipeline.h"
#include "engrave/synthetic.h"
#include "engrave/trainer.h"
#include "helpers.h"

using namespace engrave;

namespace {

std::vector<TrainExample> synthetic_set(std::uint64_t seed, int pieces, int notes) {
  ad::Rng rng(seed);
  std::vector<TrainExample> out;
  for (int i = 0; i < pieces; ++i) {
    SyntheticOptions o;
    o.notes = notes;
    out.push_back(make_example("s" + std::to_string(i), random_labeled_score(rng, o), {}));
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig c;
  c.model.encoder.hidden_size = 8;
  c.model.encoder.num_layers = 2;
  c.epochs = 5;
  return c;
}

std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
  std::vector<double> out;
  for (std::size_t i = window; i <= v.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = i - window; k < i; ++k) s += v[k];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

}  // namespace

TEST_CASE("zero learning rate and decay leave the eval loss constant") {
  TrainConfig c = small_config();
  c.lr = 0.0;
  c.weight_decay = 0.0;
  const auto set = synthetic_set(1, 2, 8);
  const TrainResult r = train(c, set, {});
  REQUIRE(r.log.size() == 5);
  for (const auto& e : r.log) CHECK(e.eval_loss == r.log.front().eval_loss);
  CHECK(evaluate_loss(Model(c.model, c.seed), set) == r.log.front().eval_loss);
}

TEST_CASE("the same seed gives byte-identical checkpoints and logs") {
  TrainConfig c = small_config();
  c.seed = 4;
  const auto set = synthetic_set(2, 3, 10);
  const TrainResult a = train(c, set, set);
  const TrainResult b = train(c, set, set);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
  std::ostringstream la, lb;
  write_metrics_csv(a.log, la);
  write_metrics_csv(b.log, lb);
  CHECK(la.str() == lb.str());
  c.seed = 5;
  CHECK(serialize_checkpoint(train(c, set, set).checkpoint) != serialize_checkpoint(a.checkpoint));
}

TEST_CASE("an empty corpus is rejected") {
  try {
    train(small_config(), {}, {});
    FAIL("expected EmptyCorpus");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyCorpus);
  }
  TrainConfig bad = small_config();
  bad.lr = -1.0;
  CHECK_THROWS_AS(train(bad, synthetic_set(1, 1, 4), {}), Error);
}

TEST_CASE("a tiny score is fitted") {
  TrainConfig c;
  c.model.encoder.hidden_size = 16;
  c.model.encoder.dropout_p = 0.0;
  c.lr = 1e-2;
  c.epochs = 150;
  const auto set = synthetic_set(3, 1, 6);
  const TrainResult r = train(c, set, {});
  CHECK(r.log.back().eval_loss < r.log.front().eval_loss);
  const Model m = model_from_checkpoint(r.checkpoint);
  const PredictionBundle b = m.predict(set[0].graph);
  std::size_t ok = 0, total = 0;
  for (NodeHead h : kAllNodeHeads) {
    for (int i = 0; i < b.note_count(); ++i) {
      ok += b.argmax(h, i) == label_class(set[0].score.labels->notes[i], h);
      ++total;
    }
  }
  CHECK(static_cast<double>(ok) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("the 50-epoch moving average of the loss does not rise") {
  TrainConfig c;
  c.model.encoder.hidden_size = 32;
  c.model.encoder.dropout_p = 0.0;
  c.lr = 3e-3;
  c.epochs = 300;
  const auto set = load_examples({fixture("corpus/piece_a.musicxml")}, {});
  for (std::uint64_t seed : {0, 1}) {
    CAPTURE(seed);
    c.seed = seed;
    const TrainResult r = train(c, set, {});
    std::vector<double> train_loss, eval_loss;
    for (const auto& e : r.log) {
      train_loss.push_back(e.train_loss);
      eval_loss.push_back(e.eval_loss);
    }
    for (const auto* series : {&train_loss, &eval_loss}) {
      const auto avg = moving_average(*series, 50);
      for (std::size_t i = 1; i < avg.size(); ++i) CHECK(avg[i] <= avg[i - 1]);
    }
  }
}

TEST_CASE("checkpoint metadata and model reconstruction") {
  TrainConfig c = small_config();
  const auto set = synthetic_set(6, 2, 8);
  const TrainResult r = train(c, set, {});
  CHECK(r.checkpoint.metadata.at("best_epoch").get<int>() == r.best_epoch);
  CHECK(r.checkpoint.config_hash == config_hash(r.checkpoint.config));
  const Model m = model_from_checkpoint(parse_checkpoint(serialize_checkpoint(r.checkpoint)));
  CHECK(evaluate_loss(m, set) == doctest::Approx(r.best_loss).epsilon(1e-12));
  CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());

  std::ostringstream csv;
  write_metrics_csv(r.log, csv);
  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header.rfind("epoch,train_loss,loss_staff", 0) == 0);
}
