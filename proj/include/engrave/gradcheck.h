#pragma once

#include <functional>
#include <string>
#include <vector>

#include "engrave/autodiff.h"

namespace engrave::ad {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Denominator floor: |a - n| / max(|a|, |n|, floor). Keeps gradients that
  // are zero up to finite-difference roundoff from reading as 100% error.
  double floor = 1e-5;
  // An entry that fails at epsilon is re-estimated at epsilon / 4. When the
  // two estimates disagree the stencil straddles a kink (ReLU, max) and the
  // smaller step is used; such entries are counted.
  bool retry_nonsmooth = true;
};

struct ParamCheck {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t nonsmooth = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  std::size_t nonsmooth = 0;
  double tolerance = 0.0;
  bool passed = false;
};

// Compares backward() against central finite differences for every entry of
// every parameter. `loss_fn` must rebuild the loss from the parameters'
// current values and be deterministic. Throws NonFiniteLoss.
GradCheckReport grad_check(const std::function<Value()>& loss_fn, const ParameterList& params,
                           double tolerance, GradCheckOptions options = {});

}  // namespace engrave::ad
