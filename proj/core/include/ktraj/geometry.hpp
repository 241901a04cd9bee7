#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ktraj {

using cplx = std::complex<double>;

/// Raised for invalid user-supplied parameters (physical limits, sizes, config keys).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a sample location leaves the normalized k-space domain [-1,1]^2.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
  Point2& operator+=(const Point2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  friend Point2 operator+(Point2 a, const Point2& b) { return a += b; }
  friend Point2 operator-(const Point2& a, const Point2& b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, const Point2& p) { return {s * p.x, s * p.y}; }
};

double norm(const Point2& p);

/// Matrix size, field of view and the derived k-space extent.
///
/// The normalized domain [-1,1]^2 maps onto [-kmax, kmax]^2 with kmax = N / (2 fov).
class ImagingGeometry {
 public:
  ImagingGeometry(int matrix_size, double fov);

  int matrix_size() const { return matrix_size_; }
  double fov() const { return fov_; }
  double kmax() const { return static_cast<double>(matrix_size_) / (2.0 * fov_); }

 private:
  int matrix_size_;
  double fov_;
};

/// Nc shots of Ns control points each, stored shot-major, all inside [-1,1]^2.
class Trajectory {
 public:
  Trajectory(int n_shots, int n_samples);
  Trajectory(int n_shots, int n_samples, std::vector<Point2> points);

  int n_shots() const { return n_shots_; }
  int n_samples() const { return n_samples_; }
  std::size_t size() const { return points_.size(); }

  std::span<const Point2> shot(int i) const;
  std::span<Point2> shot(int i);
  const Point2& at(int shot, int sample) const { return points_[index(shot, sample)]; }
  Point2& at(int shot, int sample) { return points_[index(shot, sample)]; }

  std::span<const Point2> points() const { return points_; }
  std::span<Point2> points() { return points_; }

  /// Throws DomainError when any coordinate is outside [-1,1] (beyond `slack`).
  void check_domain(double slack = 0.0) const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::size_t index(int shot, int sample) const {
    return static_cast<std::size_t>(shot) * static_cast<std::size_t>(n_samples_) +
           static_cast<std::size_t>(sample);
  }

  int n_shots_;
  int n_samples_;
  std::vector<Point2> points_;
};

/// Square complex image stored row-major. Row index runs along y, column along x;
/// pixel (row, col) sits at integer coordinate (col - N/2, row - N/2).
class ComplexImage {
 public:
  ComplexImage() = default;
  explicit ComplexImage(int n);
  ComplexImage(int n, std::vector<cplx> data);

  int size() const { return n_; }
  std::size_t pixel_count() const { return data_.size(); }

  cplx& operator()(int row, int col) { return data_[static_cast<std::size_t>(row) * n_ + col]; }
  const cplx& operator()(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * n_ + col];
  }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  friend bool operator==(const ComplexImage&, const ComplexImage&) = default;

 private:
  int n_ = 0;
  std::vector<cplx> data_;
};

/// Complex measurements at the interpolated sample locations, shot-major.
struct KSpaceData {
  int n_shots = 0;
  int samples_per_shot = 0;
  std::vector<cplx> samples;
};

/// Per-step bounds in normalized units: speed is a bound on |k[n+1]-k[n]|,
/// accel on |k[n+1]-2k[n]+k[n-1]|.
struct ConstraintBounds {
  double speed = 0.0;
  double accel = 0.0;
};

struct HardwareLimits {
  double g_max = 40e-3;        // T/m
  double s_max = 180.0;        // T/m/s
  double raster_time = 10e-6;  // s
  double dwell_time = 2e-6;    // s
  double gamma = 42.576e6;     // Hz/T

  /// Throws ConfigError unless every field is positive and raster_time is an integer
  /// multiple of dwell_time.
  void validate() const;

  /// ADC samples per raster step, round(raster_time / dwell_time).
  int interp_factor() const;
};

ConstraintBounds constraint_bounds(const HardwareLimits& limits, const ImagingGeometry& geom);

/// Nc straight spokes through the origin at angles i*pi/Nc, sampled uniformly from
/// -span*u_i to +span*u_i. When `bounds` is given the span must respect the speed bound.
Trajectory radial_init(int n_shots, int n_samples, double span,
                       const ConstraintBounds* bounds = nullptr);

}  // namespace ktraj
