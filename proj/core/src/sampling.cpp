#include "ktraj/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace ktraj {

ShotResampler::ShotResampler(int in_len, int out_len) : in_len_(in_len), out_len_(out_len) {
  if (in_len < 1 || out_len < 1) throw ConfigError("resampler lengths must be positive");
  if (out_len == 1 && in_len != 1) throw ConfigError("cannot resample a polyline to one point");
  row_start_.reserve(static_cast<std::size_t>(out_len) + 1);
  taps_.reserve(2 * static_cast<std::size_t>(out_len));
  for (int p = 0; p < out_len; ++p) {
    row_start_.push_back(static_cast<int>(taps_.size()));
    if (in_len == 1) {
      taps_.push_back({0, 1.0});
      continue;
    }
    // Integer arithmetic keeps exact hits (q = 1, endpoints) exact.
    const long long num = static_cast<long long>(p) * (in_len - 1);
    const long long den = out_len - 1;
    int i = static_cast<int>(num / den);
    long long rem = num % den;
    if (i >= in_len - 1) {
      i = in_len - 2;
      rem = den;
    }
    const double frac = static_cast<double>(rem) / static_cast<double>(den);
    if (rem == 0) {
      taps_.push_back({i, 1.0});
    } else if (rem == den) {
      taps_.push_back({i + 1, 1.0});
    } else {
      taps_.push_back({i, 1.0 - frac});
      taps_.push_back({i + 1, frac});
    }
  }
  row_start_.push_back(static_cast<int>(taps_.size()));
}

ShotResampler ShotResampler::compose(const ShotResampler& first, const ShotResampler& second) {
  if (first.out_len_ != second.in_len_) throw ConfigError("resampler shapes do not compose");
  ShotResampler out;
  out.in_len_ = first.in_len_;
  out.out_len_ = second.out_len_;
  for (int p = 0; p < second.out_len_; ++p) {
    out.row_start_.push_back(static_cast<int>(out.taps_.size()));
    std::map<int, double> merged;
    for (const auto& outer : second.row(p)) {
      for (const auto& inner : first.row(outer.index)) {
        merged[inner.index] += outer.weight * inner.weight;
      }
    }
    for (const auto& [index, weight] : merged) out.taps_.push_back({index, weight});
  }
  out.row_start_.push_back(static_cast<int>(out.taps_.size()));
  return out;
}

std::span<const ShotResampler::Tap> ShotResampler::row(int p) const {
  const auto begin = static_cast<std::size_t>(row_start_[p]);
  const auto end = static_cast<std::size_t>(row_start_[p + 1]);
  return std::span<const Tap>(taps_).subspan(begin, end - begin);
}

void ShotResampler::apply(std::span<const Point2> in, std::span<Point2> out) const {
  for (int p = 0; p < out_len_; ++p) {
    Point2 acc;
    for (const auto& tap : row(p)) acc += tap.weight * in[tap.index];
    out[p] = acc;
  }
}

void ShotResampler::apply_transpose(std::span<const Point2> out_grad,
                                    std::span<Point2> in_grad) const {
  for (int p = 0; p < out_len_; ++p) {
    for (const auto& tap : row(p)) in_grad[tap.index] += tap.weight * out_grad[p];
  }
}

std::vector<Point2> resample_shots(const ShotResampler& map, std::span<const Point2> shots,
                                   int n_shots) {
  const auto in_len = static_cast<std::size_t>(map.in_len());
  const auto out_len = static_cast<std::size_t>(map.out_len());
  if (shots.size() != in_len * static_cast<std::size_t>(n_shots)) {
    throw ConfigError("shot array does not match the resampler input length");
  }
  std::vector<Point2> out(out_len * n_shots);
  for (int s = 0; s < n_shots; ++s) {
    map.apply(shots.subspan(s * in_len, in_len), std::span(out).subspan(s * out_len, out_len));
  }
  return out;
}

std::vector<Point2> resample_shots_transpose(const ShotResampler& map,
                                             std::span<const Point2> grads, int n_shots) {
  const auto in_len = static_cast<std::size_t>(map.in_len());
  const auto out_len = static_cast<std::size_t>(map.out_len());
  if (grads.size() != out_len * static_cast<std::size_t>(n_shots)) {
    throw ConfigError("gradient array does not match the resampler output length");
  }
  std::vector<Point2> out(in_len * n_shots);
  for (int s = 0; s < n_shots; ++s) {
    map.apply_transpose(grads.subspan(s * out_len, out_len),
                        std::span(out).subspan(s * in_len, in_len));
  }
  return out;
}

std::vector<Point2> adc_interpolate(const Trajectory& traj, int q) {
  if (q < 1) throw ConfigError("interpolation factor must be >= 1");
  const ShotResampler map(traj.n_samples(), traj.n_samples() * q);
  return resample_shots(map, traj.points(), traj.n_shots());
}

std::vector<Point2> adc_interpolate_vjp(std::span<const Point2> point_grads, int n_shots,
                                        int n_samples, int q) {
  if (q < 1) throw ConfigError("interpolation factor must be >= 1");
  if (n_shots < 1 || n_samples < 2) throw ConfigError("invalid trajectory shape");
  const ShotResampler map(n_samples, n_samples * q);
  return resample_shots_transpose(map, point_grads, n_shots);
}

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

Trajectory resample_trajectory(const Trajectory& traj, int out_len) {
  const ShotResampler map(traj.n_samples(), out_len);
  return Trajectory(traj.n_shots(), out_len,
                    resample_shots(map, traj.points(), traj.n_shots()));
}

}  // namespace

// Keeping every factor-th point would need (Ns - 1) % factor == 0 and Ns % factor == 0 at
// once, which only factor 1 satisfies; uniform resampling covers both cases.
Trajectory multires_decimate(const Trajectory& traj, int factor) {
  if (!is_power_of_two(factor) || traj.n_samples() % factor != 0) {
    throw ConfigError("decimation factor " + std::to_string(factor) +
                      " must be a power of two dividing Ns = " + std::to_string(traj.n_samples()));
  }
  if (factor == 1) return traj;
  const int out_len = traj.n_samples() / factor;
  if (out_len < 2) throw ConfigError("decimation leaves fewer than two points per shot");
  return resample_trajectory(traj, out_len);
}

Trajectory multires_upsample(const Trajectory& traj, int factor) {
  if (!is_power_of_two(factor)) throw ConfigError("upsampling factor must be a power of two");
  if (factor == 1) return traj;
  return resample_trajectory(traj, traj.n_samples() * factor);
}

}  // namespace ktraj
