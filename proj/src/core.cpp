#include "engrave/core.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "engrave/error.h"

namespace engrave {
namespace {

// Pitch class of the natural steps A B C D E F G.
constexpr std::array<int, kNumSteps> kNaturalPitchClass = {9, 11, 0, 2, 4, 5, 7};
constexpr std::array<std::string_view, kNumNoteTypes> kNoteTypeNames = {
    "breve", "whole", "half", "quarter", "eighth", "16th", "32nd", "64th"};
constexpr std::array<std::string_view, kNumNodeHeads> kNodeHeadNames = {
    "staff", "spelling", "key", "stem", "octave_shift",
    "clef",  "note_type", "dots", "tuplet"};

void check_class(int cls, int width, NodeHead head) {
  if (cls < 0 || cls >= width) {
    throw Error(ErrorCode::kLabelOutOfRange,
                "class " + std::to_string(cls) + " out of range for head " +
                    std::string(node_head_name(head)));
  }
}

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedXml: return "MalformedXml";
    case ErrorCode::kUnsupportedElement: return "UnsupportedElement";
    case ErrorCode::kInconsistentTiming: return "InconsistentTiming";
    case ErrorCode::kUnrepresentableDuration: return "UnrepresentableDuration";
    case ErrorCode::kEmptyScore: return "EmptyScore";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kRelationMismatch: return "RelationMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kUnfillableGap: return "UnfillableGap";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kMissingInput: return "MissingInput";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kBadCheckpoint: return "BadCheckpoint";
  }
  return "Unknown";
}

int spelling_class(Spelling s) { return s.step * kNumAlters + (s.alter + 2); }

Spelling spelling_from_class(int cls) {
  return Spelling{cls / kNumAlters, cls % kNumAlters - 2};
}

int natural_pitch_class(int step) { return kNaturalPitchClass.at(step); }

int spelling_pitch_class(Spelling s) {
  return ((natural_pitch_class(s.step) + s.alter) % 12 + 12) % 12;
}

char step_letter(int step) { return static_cast<char>('A' + step); }

std::optional<int> step_from_letter(char letter) {
  if (letter < 'A' || letter > 'G') return std::nullopt;
  return letter - 'A';
}

std::vector<Spelling> enharmonic_spellings(int pitch_class) {
  std::vector<Spelling> out;
  for (int cls = 0; cls < kNumSpellingClasses; ++cls) {
    Spelling s = spelling_from_class(cls);
    if (spelling_pitch_class(s) == pitch_class) out.push_back(s);
  }
  return out;
}

int spelled_octave(int midi_pitch, Spelling s) {
  // Floor division keeps Cb/B# on the correct side of the octave boundary.
  int base = midi_pitch - s.alter - natural_pitch_class(s.step);
  int q = base >= 0 ? base / 12 : -((-base + 11) / 12);
  return q - 1;
}

std::string_view note_type_name(NoteType t) {
  return kNoteTypeNames[static_cast<int>(t)];
}

std::optional<NoteType> note_type_from_name(std::string_view name) {
  for (int i = 0; i < kNumNoteTypes; ++i) {
    if (kNoteTypeNames[i] == name) return static_cast<NoteType>(i);
  }
  return std::nullopt;
}

int tuplet_class(int actual_notes) {
  switch (actual_notes) {
    case 1: return 0;
    case 3: return 1;
    case 5: return 2;
    default:
      throw Error(ErrorCode::kLabelOutOfRange,
                  "unsupported tuplet ratio " + std::to_string(actual_notes));
  }
}

int tuplet_from_class(int cls) {
  static constexpr std::array<int, 3> kActual = {1, 3, 5};
  return kActual.at(cls);
}

int tuplet_normal_notes(int actual_notes) {
  switch (actual_notes) {
    case 3: return 2;
    case 5: return 4;
    default: return 1;
  }
}

std::optional<Tick> symbolic_length(NoteType type, int dots, int tuplet,
                                    int divisions_per_quarter) {
  // Work in units of 1/64 of a 64th note so dots stay integral:
  // quarter = 16 * 64 units.
  constexpr Tick kQuarterUnits = 1024;
  int exponent = static_cast<int>(NoteType::kQuarter) - static_cast<int>(type);
  Tick base = exponent >= 0 ? kQuarterUnits << exponent : kQuarterUnits >> -exponent;
  Tick len = base;
  Tick add = base;
  for (int d = 0; d < dots; ++d) {
    add /= 2;
    len += add;
  }
  Tick num = len * divisions_per_quarter * tuplet_normal_notes(tuplet);
  Tick den = kQuarterUnits * tuplet;
  if (num % den != 0) return std::nullopt;
  return num / den;
}

std::array<double, kNumFeatures> NodeFeatures::as_row() const {
  std::array<double, kNumFeatures> row{};
  std::copy(pitch_class_onehot.begin(), pitch_class_onehot.end(), row.begin());
  row[12] = octave_value;
  row[13] = norm_duration;
  row[14] = onset_fraction;
  row[15] = downbeat_flag;
  return row;
}

NodeFeatures compute_features(const QuantizedNote& note) {
  NodeFeatures f;
  f.pitch_class_onehot[note.pitch_class] = 1.0;
  f.octave_value = static_cast<double>(note.octave);
  const auto bar = static_cast<double>(note.bar_duration_div);
  f.norm_duration = std::tanh(static_cast<double>(note.duration_div) / bar);
  const Tick within = note.onset_div - note.bar_onset_div;
  f.onset_fraction = static_cast<double>(within) / bar;
  f.downbeat_flag = within == 0 ? 1.0 : 0.0;
  return f;
}

std::string_view node_head_name(NodeHead h) {
  return kNodeHeadNames[static_cast<int>(h)];
}

int label_class(const NoteLabels& labels, NodeHead head) {
  switch (head) {
    case NodeHead::kStaff: return static_cast<int>(labels.staff);
    case NodeHead::kSpelling: return spelling_class(labels.spelling);
    case NodeHead::kKey: return labels.key_fifths + 7;
    case NodeHead::kStem: return static_cast<int>(labels.stem);
    case NodeHead::kOctaveShift: return static_cast<int>(labels.octave_shift);
    case NodeHead::kClef: return static_cast<int>(labels.clef);
    case NodeHead::kNoteType: return static_cast<int>(labels.note_type);
    case NodeHead::kDots: return labels.dots;
    case NodeHead::kTuplet: return tuplet_class(labels.tuplet);
  }
  return 0;
}

void set_label_class(NoteLabels& labels, NodeHead head, int cls) {
  check_class(cls, head_width(head), head);
  switch (head) {
    case NodeHead::kStaff: labels.staff = static_cast<Staff>(cls); break;
    case NodeHead::kSpelling: labels.spelling = spelling_from_class(cls); break;
    case NodeHead::kKey: labels.key_fifths = cls - 7; break;
    case NodeHead::kStem: labels.stem = static_cast<Stem>(cls); break;
    case NodeHead::kOctaveShift:
      labels.octave_shift = static_cast<OctaveShift>(cls);
      break;
    case NodeHead::kClef: labels.clef = static_cast<Clef>(cls); break;
    case NodeHead::kNoteType: labels.note_type = static_cast<NoteType>(cls); break;
    case NodeHead::kDots: labels.dots = cls; break;
    case NodeHead::kTuplet: labels.tuplet = tuplet_from_class(cls); break;
  }
}

Tick bar_length(int numerator, int denominator, int divisions_per_quarter) {
  if (numerator <= 0 || denominator <= 0) {
    throw Error(ErrorCode::kInconsistentTiming, "non-positive time signature");
  }
  Tick num = Tick{numerator} * 4 * divisions_per_quarter;
  if (num % denominator != 0) {
    throw Error(ErrorCode::kInconsistentTiming,
                "time signature " + std::to_string(numerator) + "/" +
                    std::to_string(denominator) +
                    " is not a whole number of divisions");
  }
  return num / denominator;
}

std::vector<Bar> Score::bars() const {
  std::vector<Bar> out;
  out.reserve(bar_count);
  Tick onset = 0;
  std::size_t ts = 0;
  int num = 4, den = 4;
  for (int b = 0; b < bar_count; ++b) {
    while (ts < time_signatures.size() && time_signatures[ts].bar_index <= b) {
      num = time_signatures[ts].numerator;
      den = time_signatures[ts].denominator;
      ++ts;
    }
    Tick len = bar_length(num, den, divisions_per_quarter);
    out.push_back(Bar{b, onset, len, num, den});
    onset += len;
  }
  return out;
}

std::vector<int> canonical_order(const std::vector<QuantizedNote>& notes) {
  std::vector<int> pos(notes.size());
  std::iota(pos.begin(), pos.end(), 0);
  std::sort(pos.begin(), pos.end(), [&](int a, int b) {
    const auto& x = notes[a];
    const auto& y = notes[b];
    if (x.onset_div != y.onset_div) return x.onset_div < y.onset_div;
    if (x.midi_pitch != y.midi_pitch) return x.midi_pitch < y.midi_pitch;
    return x.id < y.id;
  });
  std::vector<int> ids(notes.size());
  for (std::size_t i = 0; i < pos.size(); ++i) ids[i] = notes[pos[i]].id;
  return ids;
}

ScoreBuildResult build_score(int divisions_per_quarter,
                             std::vector<TimeSignature> time_signatures,
                             const std::vector<RawNote>& raw, int min_bar_count) {
  if (divisions_per_quarter <= 0) {
    throw Error(ErrorCode::kInconsistentTiming, "divisions must be positive");
  }
  if (time_signatures.empty() || time_signatures.front().bar_index != 0) {
    time_signatures.insert(time_signatures.begin(), TimeSignature{0, 4, 4});
  }
  ScoreBuildResult result;
  Score& score = result.score;
  score.divisions_per_quarter = divisions_per_quarter;
  score.time_signatures = std::move(time_signatures);

  Tick last_end = 0;
  for (const auto& r : raw) {
    if (r.duration_div <= 0 || r.onset_div < 0) {
      throw Error(ErrorCode::kInconsistentTiming, "note with non-positive duration");
    }
    if (r.midi_pitch < 0 || r.midi_pitch > 127) {
      throw Error(ErrorCode::kLabelOutOfRange, "midi pitch out of range");
    }
    last_end = std::max(last_end, r.onset_div + 1);
  }
  // Grow the bar list until it covers every onset.
  score.bar_count = std::max(min_bar_count, 1);
  while (true) {
    auto bars = score.bars();
    if (bars.back().onset + bars.back().duration >= last_end) break;
    ++score.bar_count;
  }
  const auto bars = score.bars();

  std::vector<int> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (raw[a].onset_div != raw[b].onset_div) return raw[a].onset_div < raw[b].onset_div;
    if (raw[a].midi_pitch != raw[b].midi_pitch) return raw[a].midi_pitch < raw[b].midi_pitch;
    return raw[a].duration_div < raw[b].duration_div;
  });

  result.id_of_input.assign(raw.size(), -1);
  score.notes.reserve(raw.size());
  for (int id = 0; id < static_cast<int>(order.size()); ++id) {
    const RawNote& r = raw[order[id]];
    auto bar = std::upper_bound(bars.begin(), bars.end(), r.onset_div,
                                [](Tick t, const Bar& b) { return t < b.onset; });
    --bar;
    QuantizedNote n;
    n.id = id;
    n.onset_div = r.onset_div;
    n.duration_div = r.duration_div;
    n.midi_pitch = r.midi_pitch;
    n.pitch_class = r.midi_pitch % 12;
    n.octave = r.midi_pitch / 12 - 1;
    n.bar_index = bar->index;
    n.bar_onset_div = bar->onset;
    n.bar_duration_div = bar->duration;
    const Tick bar_end = bar->onset + bar->duration;
    if (n.offset_div() > bar_end) {
      n.duration_div = bar_end - n.onset_div;
      ++result.clipped_notes;
    }
    score.notes.push_back(n);
    result.id_of_input[order[id]] = id;
  }
  return result;
}

void validate_score(const Score& score) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInconsistentTiming, msg);
  };
  const auto bars = score.bars();
  std::vector<bool> seen(score.notes.size(), false);
  for (const auto& n : score.notes) {
    const std::string where = "note " + std::to_string(n.id);
    if (n.id < 0 || n.id >= static_cast<int>(score.notes.size()) || seen[n.id]) {
      fail(where + ": ids must be a permutation of 0..n-1");
    }
    seen[n.id] = true;
    if (n.duration_div <= 0) fail(where + ": non-positive duration");
    if (n.pitch_class != n.midi_pitch % 12) fail(where + ": pitch class mismatch");
    if (n.bar_index < 0 || n.bar_index >= static_cast<int>(bars.size())) {
      fail(where + ": bar index out of range");
    }
    const Bar& bar = bars[n.bar_index];
    if (bar.onset != n.bar_onset_div || bar.duration != n.bar_duration_div) {
      fail(where + ": bar fields disagree with time signatures");
    }
    if (n.onset_div < bar.onset || n.onset_div >= bar.onset + bar.duration) {
      fail(where + ": onset outside its bar");
    }
  }
  if (score.labels && score.labels->notes.size() != score.notes.size()) {
    throw Error(ErrorCode::kLengthMismatch, "label count differs from note count");
  }
}

}  // namespace engrave
