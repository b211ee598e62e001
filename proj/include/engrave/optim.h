#pragma once

#include <vector>

#include "engrave/autodiff.h"

namespace engrave::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
  // Decoupled: p -= lr * wd * p outside the moments. Coupled: g += wd * p.
  bool decoupled_weight_decay = true;
};

struct AdamMoments {
  Matrix m;
  Matrix v;
};

// One bias-corrected Adam update of a single tensor; `step` is 1-based.
void adam_update(Matrix& param, const Matrix& grad, AdamMoments& moments, long step,
                 const AdamConfig& config);

class Adam {
 public:
  Adam(const ParameterList& params, AdamConfig config);

  // Applies one update to every parameter from its accumulated gradient.
  // Parameters that received no gradient are treated as zero-gradient.
  void step(const ParameterList& params);

  long steps_taken() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<AdamMoments> moments_;
  long step_ = 0;
};

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const ParameterList& params, double max_norm);

}  // namespace engrave::ad
