#include "engrave/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "engrave/error.h"

namespace engrave::ad {
namespace {

double checked(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteLoss, "grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Value()>& loss_fn, const ParameterList& params,
                           double tolerance, GradCheckOptions options) {
  zero_grads(params);
  {
    Value loss = loss_fn();
    checked(loss.item());
    loss.backward();
  }
  GradCheckReport report;
  report.tolerance = tolerance;

  NoGradGuard no_grad;
  for (const auto& p : params) {
    Value v = p.value;
    Matrix& data = v.mutable_data();
    const Matrix analytic =
        v.grad().empty() ? Matrix(data.rows, data.cols) : v.grad();
    ParamCheck check{p.name, data.size(), 0.0, 0.0, 0};
    auto rel = [&](double a, double n) {
      return std::abs(a - n) / std::max({std::abs(a), std::abs(n), options.floor});
    };
    auto central = [&](std::size_t i, double eps) {
      const double saved = data.data[i];
      data.data[i] = saved + eps;
      const double plus = checked(loss_fn().item());
      data.data[i] = saved - eps;
      const double minus = checked(loss_fn().item());
      data.data[i] = saved;
      return (plus - minus) / (2.0 * eps);
    };
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double a = analytic.data[i];
      double numeric = central(i, options.epsilon);
      if (options.retry_nonsmooth && rel(a, numeric) >= tolerance) {
        const double fine = central(i, options.epsilon / 4.0);
        if (rel(numeric, fine) >= tolerance) {
          numeric = fine;
          ++check.nonsmooth;
        }
      }
      check.max_abs_error = std::max(check.max_abs_error, std::abs(a - numeric));
      check.max_rel_error = std::max(check.max_rel_error, rel(a, numeric));
    }
    report.nonsmooth += check.nonsmooth;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.params.push_back(std::move(check));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace engrave::ad
