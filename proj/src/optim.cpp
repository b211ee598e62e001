#include "engrave/optim.h"

#include <cmath>

#include "engrave/error.h"

namespace engrave::ad {

void adam_update(Matrix& param, const Matrix& grad, AdamMoments& moments, long step,
                 const AdamConfig& config) {
  if (moments.m.empty()) {
    moments.m = Matrix(param.rows, param.cols);
    moments.v = Matrix(param.rows, param.cols);
  }
  const bool has_grad = !grad.empty();
  if ((has_grad && !grad.same_shape(param)) || !moments.m.same_shape(param)) {
    throw Error(ErrorCode::kShapeMismatch, "adam: parameter/gradient/state shapes differ");
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    const double p = param.data[i];
    double g = has_grad ? grad.data[i] : 0.0;
    if (!config.decoupled_weight_decay) g += config.weight_decay * p;
    double& m = moments.m.data[i];
    double& v = moments.v.data[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    double update = config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    if (config.decoupled_weight_decay) update += config.lr * config.weight_decay * p;
    param.data[i] = p - update;
  }
}

Adam::Adam(const ParameterList& params, AdamConfig config)
    : config_(config), moments_(params.size()) {}

void Adam::step(const ParameterList& params) {
  if (params.size() != moments_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "adam: parameter count changed");
  }
  ++step_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Value v = params[i].value;
    adam_update(v.mutable_data(), v.grad(), moments_[i], step_, config_);
  }
}

double clip_grad_norm(const ParameterList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.value.grad().data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (const auto& p : params) {
      for (double& g : p.value.node()->grad.data) g *= s;
    }
  }
  return norm;
}

}  // namespace engrave::ad
