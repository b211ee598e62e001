#include "engrave/synthetic.h"

#include <algorithm>

namespace engrave {

Score random_labeled_score(ad::Rng& rng, const SyntheticOptions& options) {
  const Tick bar = 4 * options.divisions;
  const Tick span = bar * options.bars;
  std::vector<RawNote> raw;
  for (int i = 0; i < options.notes; ++i) {
    const Tick onset = static_cast<Tick>(rng.below(static_cast<std::uint64_t>(span)));
    const Tick duration = Tick{1} << rng.below(4);
    raw.push_back({onset, duration, 36 + static_cast<int>(rng.below(60))});
  }
  auto built = build_score(options.divisions, {{0, 4, 4}}, raw, options.bars);
  Score score = std::move(built.score);

  LabelSet labels;
  for (const auto& n : score.notes) {
    NoteLabels l;
    l.staff = static_cast<Staff>(rng.below(2));
    const auto spellings = enharmonic_spellings(n.pitch_class);
    l.spelling = spellings[rng.below(spellings.size())];
    l.key_fifths = static_cast<int>(rng.below(kNumKeyClasses)) - 7;
    l.stem = static_cast<Stem>(rng.below(3));
    l.octave_shift = static_cast<OctaveShift>(rng.below(4));
    l.clef = static_cast<Clef>(rng.below(3));
    l.note_type = static_cast<NoteType>(rng.below(kNumNoteTypes));
    l.dots = static_cast<int>(rng.below(kMaxDots + 1));
    l.tuplet = tuplet_from_class(static_cast<int>(rng.below(3)));
    labels.notes.push_back(l);
  }
  for (const auto& p : candidate_pairs(score, options.candidates)) {
    if (rng.uniform() < options.voice_edge_rate) labels.voice_edges.push_back(p);
  }
  for (const auto& p : chord_candidate_pairs(score)) {
    if (rng.uniform() < options.chord_edge_rate) {
      labels.chord_edges.emplace_back(std::min(p.first, p.second), std::max(p.first, p.second));
    }
  }
  std::sort(labels.voice_edges.begin(), labels.voice_edges.end());
  std::sort(labels.chord_edges.begin(), labels.chord_edges.end());
  score.labels = std::move(labels);
  validate_score(score);
  return score;
}

}  // namespace engrave
