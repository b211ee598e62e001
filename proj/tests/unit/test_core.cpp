#include <doctest.h>

#include <cmath>
#include <set>

#include "engrave/core.h"
#include "engrave/error.h"
#include "helpers.h"

using namespace engrave;

TEST_CASE("quarter note on the downbeat of a 4/4 bar") {
  auto built = build_score(12, {{0, 4, 4}}, {{0, 12, 60}});
  const NodeFeatures f = compute_features(built.score.notes[0]);
  CHECK(f.norm_duration == doctest::Approx(0.2449186624).epsilon(1e-9));
  CHECK(f.norm_duration == std::tanh(0.25));
  CHECK(f.onset_fraction == 0.0);
  CHECK(f.downbeat_flag == 1.0);
  CHECK(f.pitch_class_onehot[0] == 1.0);
  CHECK(f.octave_value == 4.0);
}

TEST_CASE("features match a straight-line reimplementation on a random score") {
  ad::Rng rng(11);
  std::vector<RawNote> raw;
  for (int i = 0; i < 20; ++i) {
    raw.push_back({static_cast<Tick>(rng.below(96)), 1 + static_cast<Tick>(rng.below(24)),
                   21 + static_cast<int>(rng.below(88))});
  }
  const Score score = build_score(8, {{0, 3, 4}, {2, 4, 4}}, raw).score;
  REQUIRE(score.notes.size() == 20);
  for (const auto& n : score.notes) {
    const auto row = compute_features(n).as_row();
    std::array<double, kNumFeatures> expect{};
    expect[n.midi_pitch % 12] = 1.0;
    expect[12] = n.midi_pitch / 12 - 1;
    expect[13] = std::tanh(static_cast<double>(n.duration_div) / n.bar_duration_div);
    expect[14] = static_cast<double>(n.onset_div - n.bar_onset_div) / n.bar_duration_div;
    expect[15] = n.onset_div == n.bar_onset_div ? 1.0 : 0.0;
    CHECK(row == expect);
    CHECK(row == compute_features(n).as_row());
    CHECK(row[13] > 0.0);
  }
}

TEST_CASE("spelling classes form a bijection over 35 classes") {
  std::set<std::pair<int, int>> seen;
  for (int cls = 0; cls < kNumSpellingClasses; ++cls) {
    const Spelling s = spelling_from_class(cls);
    CHECK(spelling_class(s) == cls);
    CHECK(cls == 5 * s.step + (s.alter + 2));
    seen.emplace(s.step, s.alter);
  }
  CHECK(seen.size() == 35);
  CHECK(step_letter(spelling_from_class(0).step) == 'A');
  CHECK(spelling_from_class(0).alter == -2);
}

TEST_CASE("enharmonic spellings sound as their pitch class") {
  for (int pc = 0; pc < 12; ++pc) {
    const auto spellings = enharmonic_spellings(pc);
    CHECK(!spellings.empty());
    for (const auto& s : spellings) CHECK(spelling_pitch_class(s) == pc);
  }
  // B#3 sounds as C4, Cb5 as B4.
  CHECK(spelled_octave(60, {1, 1}) == 3);
  CHECK(spelled_octave(71, {2, -1}) == 5);
  CHECK(spelled_octave(60, {2, 0}) == 4);
}

TEST_CASE("symbolic lengths") {
  CHECK(symbolic_length(NoteType::kQuarter, 0, 1, 12) == 12);
  CHECK(symbolic_length(NoteType::kQuarter, 1, 1, 12) == 18);
  CHECK(symbolic_length(NoteType::kEighth, 0, 3, 12) == 4);
  CHECK(symbolic_length(NoteType::kWhole, 0, 1, 1) == 4);
  CHECK(symbolic_length(NoteType::kBreve, 0, 1, 1) == 8);
  CHECK(symbolic_length(NoteType::kHalf, 2, 1, 4) == 14);
  CHECK_FALSE(symbolic_length(NoteType::k32nd, 0, 1, 1).has_value());
  CHECK_FALSE(symbolic_length(NoteType::kQuarter, 0, 5, 2).has_value());
}

TEST_CASE("note type names round-trip") {
  for (int t = 0; t < kNumNoteTypes; ++t) {
    const auto type = static_cast<NoteType>(t);
    CHECK(note_type_from_name(note_type_name(type)) == type);
  }
  CHECK_FALSE(note_type_from_name("crotchet").has_value());
}

TEST_CASE("label classes round-trip for every head") {
  for (NodeHead h : kAllNodeHeads) {
    for (int cls = 0; cls < head_width(h); ++cls) {
      NoteLabels l;
      set_label_class(l, h, cls);
      CHECK(label_class(l, h) == cls);
    }
  }
  NoteLabels l;
  l.key_fifths = -7;
  CHECK(label_class(l, NodeHead::kKey) == 0);
  l.tuplet = 5;
  CHECK(label_class(l, NodeHead::kTuplet) == 2);
}

TEST_CASE("build_score sorts, derives bars and clips across barlines") {
  auto built = build_score(4, {{0, 4, 4}, {1, 3, 4}},
                           {{20, 4, 67}, {0, 4, 64}, {0, 4, 60}, {14, 4, 62}});
  const Score& s = built.score;
  REQUIRE(s.notes.size() == 4);
  CHECK(s.notes[0].midi_pitch == 60);
  CHECK(s.notes[1].midi_pitch == 64);
  CHECK(s.notes[2].onset_div == 14);
  CHECK(s.notes[2].duration_div == 2);
  CHECK(built.clipped_notes == 1);
  CHECK(built.id_of_input == std::vector<int>{3, 1, 0, 2});
  CHECK(s.notes[3].bar_index == 1);
  CHECK(s.notes[3].bar_onset_div == 16);
  CHECK(s.notes[3].bar_duration_div == 12);
  CHECK(s.bar_count == 2);
  for (std::size_t i = 0; i < s.notes.size(); ++i) CHECK(s.notes[i].id == static_cast<int>(i));
}

TEST_CASE("bar lengths and score validation") {
  CHECK(bar_length(6, 8, 2) == 6);
  CHECK_THROWS_AS(bar_length(7, 16, 1), Error);
  Score s = build_score(4, {{0, 4, 4}}, {{0, 4, 60}}).score;
  validate_score(s);
  s.notes[0].pitch_class = 3;
  CHECK_THROWS_AS(validate_score(s), Error);
}
