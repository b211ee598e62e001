#pragma once

// Random labeled scores for property tests and gradient checks.

#include "engrave/autodiff.h"
#include "engrave/core.h"
#include "engrave/graph.h"

namespace engrave {

struct SyntheticOptions {
  int notes = 10;
  int bars = 2;
  int divisions = 4;
  CandidateOptions candidates;
  double voice_edge_rate = 0.3;
  double chord_edge_rate = 0.5;
};

// Notes on a 4/4 grid with uniformly drawn labels (spellings consistent with
// pitch). Voice edges are drawn from the candidate set and chord edges from
// same-onset pairs, so every truth edge is learnable.
Score random_labeled_score(ad::Rng& rng, const SyntheticOptions& options = {});

}  // namespace engrave
