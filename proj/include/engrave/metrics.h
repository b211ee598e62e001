#pragma once

// Evaluation measures: successor-edge F1 over chord-collapsed voice streams,
// chord-edge F1, per-head exact-match accuracies and their corpus
// micro-averages.

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "engrave/core.h"
#include "engrave/decoders.h"
#include "engrave/engraved.h"
#include "engrave/graph.h"

namespace engrave {

struct Prf {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  // Both sets empty counts as perfect.
  double precision() const;
  double recall() const;
  double f1() const;
  Prf& operator+=(const Prf& o);
  bool operator==(const Prf&) const = default;
};

struct Count {
  std::size_t correct = 0;
  std::size_t total = 0;

  double value() const { return total == 0 ? 1.0 : static_cast<double>(correct) / total; }
  Count& operator+=(const Count& o);
  bool operator==(const Count&) const = default;
};

// Set F1 between two edge lists (duplicates ignored).
Prf edge_f1(const std::vector<NotePair>& predicted, const std::vector<NotePair>& truth);

// Voice F1 with both sides mapped onto ground-truth chord units; edges that
// collapse inside one unit are dropped.
Prf voice_f1(const std::vector<NotePair>& predicted, const std::vector<NotePair>& truth,
             const std::vector<NotePair>& truth_chords, int note_count);

// Throws LengthMismatch.
Count per_note_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);
// Notes whose type, dots and tuplet are all correct.
Count joint_duration_accuracy(const std::vector<NoteLabels>& predicted,
                              const std::vector<NoteLabels>& truth);

struct EvalReport {
  std::string name;
  std::size_t notes = 0;
  Prf voice;      // engraved output
  Prf raw_voice;  // thresholded voice probabilities, before postprocessing
  Prf chord;
  std::array<Count, kNumNodeHeads> heads{};
  Count joint_duration;

  nlohmann::json to_json() const;
};

// Compares engraved labels (and the raw bundle) against the score's truth.
EvalReport evaluate(const Score& truth, const EngravedScore& engraved,
                    const PredictionBundle& bundle, double threshold = 0.5);

struct CorpusReport {
  std::vector<EvalReport> pieces;
  EvalReport micro;  // counts summed over pieces

  nlohmann::json to_json() const;
};

CorpusReport aggregate(std::vector<EvalReport> pieces);

// Console table: one row per piece plus the micro average.
std::string format_table(const CorpusReport& report);

}  // namespace engrave
