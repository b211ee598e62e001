#pragma once

// The engraved score: notes grouped into voices with rests filling every bar,
// final per-note labels, measure keys, clef regions and octave brackets.

#include <string>
#include <vector>

#include "engrave/core.h"

namespace engrave {

// A chord, a single note, or a rest inside one voice.
struct EngravedEvent {
  Tick onset = 0;
  Tick duration = 0;
  std::vector<int> notes;  // note ids by ascending pitch; empty for a rest
  NoteType type = NoteType::kQuarter;
  int dots = 0;
  int tuplet = 1;
  Stem stem = Stem::kNone;
  bool tuplet_start = false;
  bool tuplet_stop = false;

  bool is_rest() const { return notes.empty(); }
  Tick offset() const { return onset + duration; }
  bool operator==(const EngravedEvent&) const = default;
};

struct EngravedVoice {
  Staff staff = Staff::kUpper;
  int first_bar = 0;
  int last_bar = 0;
  std::vector<EngravedEvent> events;  // sorted, gap-free over its bars
  bool operator==(const EngravedVoice&) const = default;
};

struct ClefChange {
  Staff staff = Staff::kUpper;
  Tick time = 0;
  Clef clef = Clef::kG;
  bool operator==(const ClefChange&) const = default;
};

// Notes of `staff` with onset in [start, stop) carry `shift`.
struct OctaveBracket {
  Staff staff = Staff::kUpper;
  Tick start = 0;
  Tick stop = 0;
  OctaveShift shift = OctaveShift::kNone;
  bool operator==(const OctaveBracket&) const = default;
};

struct EngravedScore {
  Score score;  // score.labels holds the final labels and derived edges
  std::vector<int> measure_keys;  // fifths per bar
  std::vector<EngravedVoice> voices;
  std::vector<ClefChange> clefs;  // sorted by (staff, time); time 0 present per staff
  std::vector<OctaveBracket> brackets;  // sorted by (staff, start)
  bool operator==(const EngravedScore&) const = default;
};

// Lists every violated structural invariant (bar sums, monophony, note
// completeness, clef coverage). Empty when the score is valid.
std::vector<std::string> check_engraved(const EngravedScore& engraved);

}  // namespace engrave
