#include "ktraj/optim.hpp"

#include <cmath>
#include <string>

namespace ktraj {
namespace {

void prepare(OptimState& s, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("parameter/gradient size mismatch");
  if (s.m.empty() && s.v.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size() || s.v.size() != params.size()) {
    throw std::invalid_argument("optimizer state does not match the parameter block");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NonFiniteError("non-finite gradient at index " + std::to_string(i) + " (step " +
                           std::to_string(s.step + 1) + ")");
    }
  }
}

void update_moments(OptimState& s, std::span<const double> grads) {
  ++s.step;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
  }
}

}  // namespace

void adam_step(OptimState& s, std::span<double> params, std::span<const double> grads) {
  prepare(s, params, grads);
  update_moments(s, grads);
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

double radam_rectifier(double beta2, std::int64_t step) {
  const double t = static_cast<double>(step);
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, t);
  const double rho = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
  if (rho <= 4.0) return 0.0;
  return std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
}

void radam_step(OptimState& s, std::span<double> params, std::span<const double> grads) {
  prepare(s, params, grads);
  update_moments(s, grads);
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  const double r = radam_rectifier(s.beta2, s.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double mhat = s.m[i] / c1;
    if (r > 0.0) {
      params[i] -= s.lr * r * mhat / (std::sqrt(s.v[i] / c2) + s.eps);
    } else {
      params[i] -= s.lr * mhat;
    }
  }
}

}  // namespace ktraj
