#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ktraj {

/// Raised when a gradient or loss stops being finite; the step is not applied.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  OptimState() = default;
  OptimState(std::size_t size, double learning_rate)
      : m(size, 0.0), v(size, 0.0), lr(learning_rate) {}
};

/// Bias-corrected ADAM update in place. Throws NonFiniteError (leaving state and
/// params untouched) when any gradient is NaN or infinite.
void adam_step(OptimState& state, std::span<double> params, std::span<const double> grads);

/// Rectified ADAM. While the variance estimate is too young (rho_t <= 4) the update
/// falls back to bias-corrected momentum SGD.
void radam_step(OptimState& state, std::span<double> params, std::span<const double> grads);

/// Rectification term r_t of rectified ADAM, or 0 when rho_t <= 4.
double radam_rectifier(double beta2, std::int64_t t);

}  // namespace ktraj
