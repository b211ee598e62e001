#pragma once

// Domain model shared by every stage of the engraving pipeline: quantized
// notes, the per-note engraving labels, and the score container.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace engrave {

using Tick = std::int64_t;

enum class Staff : std::uint8_t { kUpper = 0, kLower = 1 };
enum class Stem : std::uint8_t { kUp = 0, kDown = 1, kNone = 2 };
enum class OctaveShift : std::uint8_t { kNone = 0, k8va = 1, k8vb = 2, k15ma = 3 };
enum class Clef : std::uint8_t { kG = 0, kF = 1, kC = 2 };
enum class NoteType : std::uint8_t {
  kBreve = 0,
  kWhole,
  kHalf,
  kQuarter,
  kEighth,
  k16th,
  k32nd,
  k64th,
};

inline constexpr int kNumSteps = 7;    // A..G
inline constexpr int kNumAlters = 5;   // bb, b, natural, #, ##
inline constexpr int kNumSpellingClasses = kNumSteps * kNumAlters;
inline constexpr int kNumKeyClasses = 15;  // fifths -7..+7
inline constexpr int kNumNoteTypes = 8;
inline constexpr int kMaxDots = 3;

// A letter name plus accidental. step: 0..6 for A..G, alter: -2..+2.
struct Spelling {
  int step = 2;
  int alter = 0;
  bool operator==(const Spelling&) const = default;
};

int spelling_class(Spelling s);
Spelling spelling_from_class(int cls);
int natural_pitch_class(int step);
int spelling_pitch_class(Spelling s);
char step_letter(int step);
std::optional<int> step_from_letter(char letter);
// Every spelling (|alter| <= 2) that sounds as the given pitch class.
std::vector<Spelling> enharmonic_spellings(int pitch_class);
// Written octave of a midi pitch under a spelling (B#3 sounds as C4).
int spelled_octave(int midi_pitch, Spelling s);

std::string_view note_type_name(NoteType t);
std::optional<NoteType> note_type_from_name(std::string_view name);

// Tuplet ratio is stored as the actual-note count: 1 (none), 3, or 5.
int tuplet_class(int actual_notes);
int tuplet_from_class(int cls);
int tuplet_normal_notes(int actual_notes);

// Length in divisions of type + dots + tuplet, if it is a whole number.
std::optional<Tick> symbolic_length(NoteType type, int dots, int tuplet,
                                    int divisions_per_quarter);

struct QuantizedNote {
  int id = 0;
  Tick onset_div = 0;
  Tick duration_div = 1;
  int midi_pitch = 60;
  int pitch_class = 0;
  int octave = 4;
  int bar_index = 0;
  Tick bar_onset_div = 0;
  Tick bar_duration_div = 1;

  Tick offset_div() const { return onset_div + duration_div; }
  bool operator==(const QuantizedNote&) const = default;
};

inline constexpr int kNumFeatures = 16;

struct NodeFeatures {
  std::array<double, 12> pitch_class_onehot{};
  double octave_value = 0.0;
  double norm_duration = 0.0;
  double onset_fraction = 0.0;
  double downbeat_flag = 0.0;

  std::array<double, kNumFeatures> as_row() const;
};

NodeFeatures compute_features(const QuantizedNote& note);

struct NoteLabels {
  Staff staff = Staff::kUpper;
  Spelling spelling{};
  int key_fifths = 0;
  Stem stem = Stem::kNone;
  OctaveShift octave_shift = OctaveShift::kNone;
  Clef clef = Clef::kG;
  NoteType note_type = NoteType::kQuarter;
  int dots = 0;
  int tuplet = 1;
  bool operator==(const NoteLabels&) const = default;
};

// Ground truth (or final) engraving labels. `notes` is indexed by note id;
// voice edges are ordered (u, w); chord edges are stored with u < w.
struct LabelSet {
  std::vector<NoteLabels> notes;
  std::vector<std::pair<int, int>> voice_edges;
  std::vector<std::pair<int, int>> chord_edges;
  bool operator==(const LabelSet&) const = default;
};

enum class NodeHead : std::uint8_t {
  kStaff = 0,
  kSpelling,
  kKey,
  kStem,
  kOctaveShift,
  kClef,
  kNoteType,
  kDots,
  kTuplet,
};
inline constexpr int kNumNodeHeads = 9;
inline constexpr std::array<int, kNumNodeHeads> kNodeHeadWidths = {
    2, kNumSpellingClasses, kNumKeyClasses, 3, 4, 3, kNumNoteTypes, 4, 3};
inline constexpr std::array<NodeHead, kNumNodeHeads> kAllNodeHeads = {
    NodeHead::kStaff,  NodeHead::kSpelling,    NodeHead::kKey,
    NodeHead::kStem,   NodeHead::kOctaveShift, NodeHead::kClef,
    NodeHead::kNoteType, NodeHead::kDots,      NodeHead::kTuplet};

inline int head_width(NodeHead h) {
  return kNodeHeadWidths[static_cast<int>(h)];
}
std::string_view node_head_name(NodeHead h);
int label_class(const NoteLabels& labels, NodeHead head);
void set_label_class(NoteLabels& labels, NodeHead head, int cls);

struct TimeSignature {
  int bar_index = 0;
  int numerator = 4;
  int denominator = 4;
  bool operator==(const TimeSignature&) const = default;
};

struct Bar {
  int index = 0;
  Tick onset = 0;
  Tick duration = 0;
  int numerator = 4;
  int denominator = 4;
};

// Bar length in divisions; throws InconsistentTiming when fractional.
Tick bar_length(int numerator, int denominator, int divisions_per_quarter);

struct Score {
  int divisions_per_quarter = 1;
  std::vector<TimeSignature> time_signatures;
  int bar_count = 0;
  std::vector<QuantizedNote> notes;  // canonical order, ids 0..n-1
  std::optional<LabelSet> labels;

  std::vector<Bar> bars() const;
  bool operator==(const Score&) const = default;
};

// A note given by absolute position only; bar fields are derived.
struct RawNote {
  Tick onset_div = 0;
  Tick duration_div = 1;
  int midi_pitch = 60;
};

struct ScoreBuildResult {
  Score score;
  int clipped_notes = 0;
  // Maps each raw note index to the id it received.
  std::vector<int> id_of_input;
};

// Assembles a canonical Score: notes sorted by (onset, pitch, duration, input
// order), ids assigned in that order, bar fields derived from the time
// signatures, durations crossing a barline clipped to the bar end (and
// counted).
ScoreBuildResult build_score(int divisions_per_quarter,
                             std::vector<TimeSignature> time_signatures,
                             const std::vector<RawNote>& raw, int min_bar_count = 0);

// Throws InconsistentTiming / LabelOutOfRange on a violated invariant.
void validate_score(const Score& score);

// Note ids sorted by (onset, pitch, id).
std::vector<int> canonical_order(const std::vector<QuantizedNote>& notes);

}  // namespace engrave
