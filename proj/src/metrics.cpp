#include "engrave/metrics.h"

#include <algorithm>
#include <cstdio>
#include <set>

#include "engrave/error.h"
#include "engrave/postprocess.h"

namespace engrave {

double Prf::precision() const {
  const std::size_t d = true_positive + false_positive;
  if (d == 0) return false_negative == 0 ? 1.0 : 0.0;
  return static_cast<double>(true_positive) / d;
}

double Prf::recall() const {
  const std::size_t d = true_positive + false_negative;
  if (d == 0) return false_positive == 0 ? 1.0 : 0.0;
  return static_cast<double>(true_positive) / d;
}

double Prf::f1() const {
  const std::size_t d = 2 * true_positive + false_positive + false_negative;
  if (d == 0) return 1.0;
  return 2.0 * static_cast<double>(true_positive) / d;
}

Prf& Prf::operator+=(const Prf& o) {
  true_positive += o.true_positive;
  false_positive += o.false_positive;
  false_negative += o.false_negative;
  return *this;
}

Count& Count::operator+=(const Count& o) {
  correct += o.correct;
  total += o.total;
  return *this;
}

namespace {

Prf set_f1(const std::set<NotePair>& predicted, const std::set<NotePair>& truth) {
  Prf out;
  for (const auto& e : predicted) {
    if (truth.contains(e)) ++out.true_positive;
    else ++out.false_positive;
  }
  out.false_negative = truth.size() - out.true_positive;
  return out;
}

}  // namespace

Prf edge_f1(const std::vector<NotePair>& predicted, const std::vector<NotePair>& truth) {
  return set_f1({predicted.begin(), predicted.end()}, {truth.begin(), truth.end()});
}

Prf voice_f1(const std::vector<NotePair>& predicted, const std::vector<NotePair>& truth,
             const std::vector<NotePair>& truth_chords, int note_count) {
  const std::vector<int> unit = connected_components(note_count, truth_chords);
  auto collapse = [&](const std::vector<NotePair>& edges) {
    std::set<NotePair> out;
    for (const auto& [u, w] : edges) {
      if (u < 0 || w < 0 || u >= note_count || w >= note_count) {
        throw Error(ErrorCode::kLengthMismatch, "edge references note outside the score");
      }
      if (unit[u] != unit[w]) out.emplace(unit[u], unit[w]);
    }
    return out;
  };
  return set_f1(collapse(predicted), collapse(truth));
}

Count per_note_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(predicted.size()) + " predictions for " +
                                                std::to_string(truth.size()) + " notes");
  }
  Count c;
  c.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) c.correct += predicted[i] == truth[i];
  return c;
}

Count joint_duration_accuracy(const std::vector<NoteLabels>& predicted,
                              const std::vector<NoteLabels>& truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(predicted.size()) + " predictions for " +
                                                std::to_string(truth.size()) + " notes");
  }
  Count c;
  c.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    c.correct += predicted[i].note_type == truth[i].note_type && predicted[i].dots == truth[i].dots &&
                 predicted[i].tuplet == truth[i].tuplet;
  }
  return c;
}

EvalReport evaluate(const Score& truth, const EngravedScore& engraved, const PredictionBundle& bundle,
                    double threshold) {
  if (!truth.labels || !engraved.score.labels) {
    throw Error(ErrorCode::kMissingInput, "evaluation needs ground-truth and engraved labels");
  }
  const LabelSet& t = *truth.labels;
  const LabelSet& p = *engraved.score.labels;
  const int n = static_cast<int>(truth.notes.size());
  if (static_cast<int>(p.notes.size()) != n || bundle.note_count() != n) {
    throw Error(ErrorCode::kLengthMismatch, "prediction and truth cover different notes");
  }
  EvalReport r;
  r.notes = static_cast<std::size_t>(n);
  r.voice = voice_f1(p.voice_edges, t.voice_edges, t.chord_edges, n);
  r.chord = edge_f1(p.chord_edges, t.chord_edges);
  std::vector<NotePair> raw;
  for (std::size_t i = 0; i < bundle.voice_pairs.size(); ++i) {
    if (bundle.voice_prob[i] > threshold) raw.push_back(bundle.voice_pairs[i]);
  }
  r.raw_voice = edge_f1(raw, t.voice_edges);
  for (NodeHead h : kAllNodeHeads) {
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = label_class(p.notes[i], h);
      b[i] = label_class(t.notes[i], h);
    }
    r.heads[static_cast<int>(h)] = per_note_accuracy(a, b);
  }
  r.joint_duration = joint_duration_accuracy(p.notes, t.notes);
  return r;
}

namespace {

nlohmann::json prf_json(const Prf& p) {
  return {{"precision", p.precision()}, {"recall", p.recall()}, {"f1", p.f1()},
          {"tp", p.true_positive},      {"fp", p.false_positive}, {"fn", p.false_negative}};
}

nlohmann::json count_json(const Count& c) {
  return {{"accuracy", c.value()}, {"correct", c.correct}, {"total", c.total}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json heads_json = nlohmann::json::object();
  for (NodeHead h : kAllNodeHeads) heads_json[std::string(node_head_name(h))] = count_json(heads[static_cast<int>(h)]);
  return {{"name", name},
          {"notes", notes},
          {"voice", prf_json(voice)},
          {"raw_voice", prf_json(raw_voice)},
          {"chord", prf_json(chord)},
          {"accuracy", heads_json},
          {"joint_duration", count_json(joint_duration)}};
}

CorpusReport aggregate(std::vector<EvalReport> pieces) {
  CorpusReport out;
  out.micro.name = "micro";
  for (const auto& p : pieces) {
    out.micro.notes += p.notes;
    out.micro.voice += p.voice;
    out.micro.raw_voice += p.raw_voice;
    out.micro.chord += p.chord;
    for (int h = 0; h < kNumNodeHeads; ++h) out.micro.heads[h] += p.heads[h];
    out.micro.joint_duration += p.joint_duration;
  }
  out.pieces = std::move(pieces);
  return out;
}

nlohmann::json CorpusReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : pieces) list.push_back(p.to_json());
  return {{"pieces", list}, {"micro", micro.to_json()}};
}

std::string format_table(const CorpusReport& report) {
  std::string out;
  char buf[64];
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof buf, " %7.2f", 100.0 * v);
    out += buf;
  };
  std::snprintf(buf, sizeof buf, "%-24s", "piece");
  out += buf;
  for (const char* h : {"voice", "chord", "staff", "spell", "key", "stem", "octave", "clef", "dur"}) {
    std::snprintf(buf, sizeof buf, " %7s", h);
    out += buf;
  }
  out += '\n';
  auto row = [&](const EvalReport& r) {
    std::snprintf(buf, sizeof buf, "%-24.24s", r.name.c_str());
    out += buf;
    cell(r.voice.f1());
    cell(r.chord.f1());
    for (NodeHead h : {NodeHead::kStaff, NodeHead::kSpelling, NodeHead::kKey, NodeHead::kStem,
                       NodeHead::kOctaveShift, NodeHead::kClef}) {
      cell(r.heads[static_cast<int>(h)].value());
    }
    cell(r.joint_duration.value());
    out += '\n';
  };
  for (const auto& p : report.pieces) row(p);
  row(report.micro);
  return out;
}

}  // namespace engrave
