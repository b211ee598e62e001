#pragma once

#include <string>

#include "engrave/autodiff.h"
#include "engrave/core.h"

inline std::string fixture(const std::string& rel) { return std::string(ENGRAVE_FIXTURE_DIR) + "/" + rel; }

inline engrave::ad::Matrix random_matrix(int r, int c, engrave::ad::Rng& rng, double lo = -1.0, double hi = 1.0) {
  engrave::ad::Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}
