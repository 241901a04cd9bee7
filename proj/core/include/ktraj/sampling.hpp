#pragma once

#include <span>
#include <vector>

#include "ktraj/geometry.hpp"

namespace ktraj {

/// Sparse linear map from a polyline of `in_len` control points to `out_len` points
/// spaced uniformly in the control-point parameter: output p sits at
/// t_p = p (in_len - 1) / (out_len - 1). Endpoints are reproduced exactly.
///
/// Rows hold at most a few taps, so the map composes cheaply and its transpose is exact.
class ShotResampler {
 public:
  struct Tap {
    int index;
    double weight;
  };

  ShotResampler(int in_len, int out_len);

  /// Composition: applies `first`, then `second`.
  static ShotResampler compose(const ShotResampler& first, const ShotResampler& second);

  int in_len() const { return in_len_; }
  int out_len() const { return out_len_; }
  std::span<const Tap> row(int p) const;

  void apply(std::span<const Point2> in, std::span<Point2> out) const;
  /// Accumulates the transpose: in_grad += M^T out_grad.
  void apply_transpose(std::span<const Point2> out_grad, std::span<Point2> in_grad) const;

 private:
  ShotResampler() = default;

  int in_len_ = 0;
  int out_len_ = 0;
  std::vector<int> row_start_;
  std::vector<Tap> taps_;
};

/// Applies the same per-shot map to every shot of a shot-major array.
std::vector<Point2> resample_shots(const ShotResampler& map, std::span<const Point2> shots,
                                   int n_shots);
std::vector<Point2> resample_shots_transpose(const ShotResampler& map,
                                             std::span<const Point2> grads, int n_shots);

/// ADC-pace sampling: each shot becomes Ns*q points (shot-major).
std::vector<Point2> adc_interpolate(const Trajectory& traj, int q);

/// Transpose of adc_interpolate, mapping per-sample gradients to control-point gradients.
std::vector<Point2> adc_interpolate_vjp(std::span<const Point2> point_grads, int n_shots,
                                        int n_samples, int q);

/// Coarsens each shot to Ns/factor points. `factor` must be a power of two dividing Ns.
Trajectory multires_decimate(const Trajectory& traj, int factor);

/// Refines each shot to factor*Ns points by uniform polyline resampling.
Trajectory multires_upsample(const Trajectory& traj, int factor = 2);

}  // namespace ktraj
