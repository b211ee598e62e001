#include <doctest.h>

#include "engrave/error.h"
#include "engrave/metrics.h"
#include "engrave/postprocess.h"
#include "engrave/synthetic.h"
#include "helpers.h"
#include "oracles.h"

using namespace engrave;

TEST_CASE("edge F1 edge cases") {
  CHECK(edge_f1({}, {}).f1() == 1.0);
  CHECK(edge_f1({}, {}).precision() == 1.0);
  const Prf none = edge_f1({}, {{0, 1}});
  CHECK(none.f1() == 0.0);
  CHECK(none.precision() == 0.0);
  CHECK(none.recall() == 0.0);
  CHECK(edge_f1({{0, 1}}, {}).f1() == 0.0);
  const Prf dup = edge_f1({{0, 1}, {0, 1}, {1, 2}}, {{0, 1}});
  CHECK(dup.true_positive == 1);
  CHECK(dup.false_positive == 1);
}

TEST_CASE("F1 is symmetric in prediction and truth") {
  ad::Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<NotePair> a, b;
    for (int k = 0; k < 10; ++k) {
      if (rng.uniform() < 0.5) a.emplace_back(static_cast<int>(rng.below(5)), static_cast<int>(rng.below(5)));
      if (rng.uniform() < 0.5) b.emplace_back(static_cast<int>(rng.below(5)), static_cast<int>(rng.below(5)));
    }
    const Prf ab = edge_f1(a, b), ba = edge_f1(b, a);
    CHECK(ab.f1() == ba.f1());
    CHECK(ab.precision() == ba.recall());
  }
}

TEST_CASE("voice F1 collapses chords of the truth") {
  // Truth: chord {0,1} then note 2. Predicting either chord member as the
  // predecessor is the same unit edge.
  const std::vector<NotePair> truth = {{0, 2}, {1, 2}};
  const std::vector<NotePair> chords = {{0, 1}};
  const Prf p = voice_f1({{1, 2}}, truth, chords, 3);
  CHECK(p.true_positive == 1);
  CHECK(p.false_positive == 0);
  CHECK(p.false_negative == 0);
  // An edge inside the chord unit is dropped, not counted as wrong.
  CHECK(voice_f1({{0, 1}, {0, 2}}, truth, chords, 3).f1() == 1.0);
}

TEST_CASE("per-note accuracy equals a counting oracle") {
  ad::Rng rng(3);
  std::vector<int> a(1000), b(1000);
  std::size_t same = 0;
  for (int i = 0; i < 1000; ++i) {
    a[i] = static_cast<int>(rng.below(4));
    b[i] = static_cast<int>(rng.below(4));
    same += a[i] == b[i];
  }
  const Count c = per_note_accuracy(a, b);
  CHECK(c.correct == same);
  CHECK(c.total == 1000);
  CHECK(c.value() == static_cast<double>(same) / 1000.0);
  try {
    per_note_accuracy({1, 2}, {1});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLengthMismatch);
  }
}

TEST_CASE("evaluation matches the oracles on random scores") {
  ad::Rng rng(5);
  std::vector<EvalReport> reports;
  for (int t = 0; t < 30; ++t) {
    SyntheticOptions o;
    o.notes = 6 + static_cast<int>(rng.below(10));
    const Score truth = random_labeled_score(rng, o);
    const ScoreGraph g = build_graph(truth);
    PredictionBundle b = bundle_from_labels(*truth.labels, g);
    for (auto& m : b.node_logits) {
      for (double& x : m.data) x += rng.uniform(-30, 30);
    }
    for (double& p : b.voice_prob) p = rng.uniform();
    for (double& p : b.chord_prob) p = rng.uniform();
    const EngravedScore e = postprocess(b, truth);
    const EvalReport r = evaluate(truth, e, b, 0.5);
    const int n = static_cast<int>(truth.notes.size());

    const auto v = oracle::voice(*e.score.labels, *truth.labels, n);
    CHECK(r.voice.true_positive == v.tp);
    CHECK(r.voice.false_positive == v.fp);
    CHECK(r.voice.false_negative == v.fn);
    CHECK(r.voice.f1() == v.f1());
    const auto c = oracle::chord(*e.score.labels, *truth.labels);
    CHECK(r.chord.f1() == c.f1());
    const auto rv = oracle::raw_voice(b, *truth.labels, 0.5);
    CHECK(r.raw_voice.f1() == rv.f1());
    const auto heads = oracle::head_counts(*e.score.labels, *truth.labels);
    for (int k = 0; k < kNumNodeHeads; ++k) {
      CHECK(r.heads[k].correct == static_cast<std::size_t>(heads[k].first));
      CHECK(r.heads[k].total == static_cast<std::size_t>(heads[k].second));
    }
    for (int k : {6, 7, 8}) CHECK(r.joint_duration.correct <= r.heads[k].correct);
    reports.push_back(r);
  }
  const CorpusReport corpus = aggregate(reports);
  for (int k = 0; k < kNumNodeHeads; ++k) {
    double weighted = 0.0, notes = 0.0;
    for (const auto& r : reports) {
      weighted += r.heads[k].value() * static_cast<double>(r.notes);
      notes += static_cast<double>(r.notes);
    }
    CHECK(corpus.micro.heads[k].value() == doctest::Approx(weighted / notes).epsilon(1e-12));
  }
  CHECK(corpus.micro.notes == [&] {
    std::size_t s = 0;
    for (const auto& r : reports) s += r.notes;
    return s;
  }());
  const std::string table = format_table(corpus);
  CHECK(table.find("voice") != std::string::npos);
  CHECK(corpus.to_json().contains("micro"));
}
