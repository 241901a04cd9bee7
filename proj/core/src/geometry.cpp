#include "ktraj/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace ktraj {

double norm(const Point2& p) { return std::hypot(p.x, p.y); }

ImagingGeometry::ImagingGeometry(int matrix_size, double fov) : matrix_size_(matrix_size), fov_(fov) {
  if (matrix_size <= 0 || matrix_size % 2 != 0) {
    throw ConfigError("matrix size must be positive and even, got " + std::to_string(matrix_size));
  }
  if (!(fov > 0.0) || !std::isfinite(fov)) {
    throw ConfigError("field of view must be positive");
  }
}

Trajectory::Trajectory(int n_shots, int n_samples)
    : Trajectory(n_shots, n_samples,
                 std::vector<Point2>(static_cast<std::size_t>(std::max(n_shots, 0)) *
                                     static_cast<std::size_t>(std::max(n_samples, 0)))) {}

Trajectory::Trajectory(int n_shots, int n_samples, std::vector<Point2> points)
    : n_shots_(n_shots), n_samples_(n_samples), points_(std::move(points)) {
  if (n_shots < 1) throw ConfigError("trajectory needs at least one shot");
  if (n_samples < 2) throw ConfigError("trajectory needs at least two samples per shot");
  if (points_.size() != static_cast<std::size_t>(n_shots) * static_cast<std::size_t>(n_samples)) {
    throw ConfigError("trajectory point count does not match Nc x Ns");
  }
}

std::span<const Point2> Trajectory::shot(int i) const {
  return std::span<const Point2>(points_).subspan(index(i, 0), static_cast<std::size_t>(n_samples_));
}

std::span<Point2> Trajectory::shot(int i) {
  return std::span<Point2>(points_).subspan(index(i, 0), static_cast<std::size_t>(n_samples_));
}

void Trajectory::check_domain(double slack) const {
  const double lim = 1.0 + slack;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!(std::abs(p.x) <= lim) || !(std::abs(p.y) <= lim)) {
      std::ostringstream os;
      os << "trajectory point " << i << " (" << p.x << ", " << p.y << ") lies outside [-1,1]^2";
      throw DomainError(os.str());
    }
  }
}

ComplexImage::ComplexImage(int n)
    : n_(n), data_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
  if (n <= 0) throw ConfigError("image size must be positive");
}

ComplexImage::ComplexImage(int n, std::vector<cplx> data) : n_(n), data_(std::move(data)) {
  if (n <= 0) throw ConfigError("image size must be positive");
  if (data_.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw ConfigError("image data is not N x N");
  }
}

void HardwareLimits::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + " must be strictly positive");
    }
  };
  positive(g_max, "g_max");
  positive(s_max, "s_max");
  positive(raster_time, "raster_time");
  positive(dwell_time, "dwell_time");
  positive(gamma, "gamma");
  const double ratio = raster_time / dwell_time;
  if (ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-6 * ratio) {
    throw ConfigError("raster_time must be an integer multiple of dwell_time");
  }
}

int HardwareLimits::interp_factor() const {
  validate();
  return static_cast<int>(std::lround(raster_time / dwell_time));
}

ConstraintBounds constraint_bounds(const HardwareLimits& limits, const ImagingGeometry& geom) {
  limits.validate();
  const double kmax = geom.kmax();
  return {
      .speed = limits.gamma * limits.g_max * limits.raster_time / kmax,
      .accel = limits.gamma * limits.s_max * limits.raster_time * limits.raster_time / kmax,
  };
}

Trajectory radial_init(int n_shots, int n_samples, double span, const ConstraintBounds* bounds) {
  if (n_shots < 1 || n_samples < 2) throw ConfigError("radial_init needs Nc >= 1 and Ns >= 2");
  if (!(span > 0.0) || span > 1.0) throw ConfigError("radial span must lie in (0, 1]");
  if (bounds != nullptr) {
    const double reach = bounds->speed * static_cast<double>(n_samples - 1) / 2.0;
    if (span > reach) {
      std::ostringstream os;
      os << "radial span " << span << " exceeds the speed-bound reach " << reach;
      throw ConfigError(os.str());
    }
  }

  Trajectory traj(n_shots, n_samples);
  const double last = static_cast<double>(n_samples - 1);
  for (int i = 0; i < n_shots; ++i) {
    const double angle = static_cast<double>(i) * std::numbers::pi / static_cast<double>(n_shots);
    const double ux = std::cos(angle);
    const double uy = std::sin(angle);
    for (int s = 0; s < n_samples; ++s) {
      // Symmetric parameterization so the midpoint of an odd-length spoke is exactly 0.
      const double r = span * (2.0 * static_cast<double>(s) - last) / last;
      traj.at(i, s) = {r * ux, r * uy};
    }
  }
  return traj;
}

}  // namespace ktraj
