#include "ktraj/nufft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

namespace ktraj {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))), size(n) {
    if (data == nullptr) throw std::bad_alloc();
    std::fill_n(reinterpret_cast<double*>(data), 2 * n, 0.0);
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  cplx& operator[](std::size_t i) { return reinterpret_cast<cplx*>(data)[i]; }
  std::span<cplx> view() { return {reinterpret_cast<cplx*>(data), size}; }

  fftw_complex* data;
  std::size_t size;
};

void check_points(std::span<const Point2> points) {
  for (std::size_t m = 0; m < points.size(); ++m) {
    const auto& p = points[m];
    if (!(std::abs(p.x) <= 1.0) || !(std::abs(p.y) <= 1.0)) {
      std::ostringstream os;
      os << "sample " << m << " at (" << p.x << ", " << p.y << ") is outside [-1,1]^2";
      throw DomainError(os.str());
    }
  }
}

double kaiser_bessel(double d, double width, double beta) {
  const double t = 2.0 * d / width;
  if (std::abs(t) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - t * t));
}

// Continuous Fourier transform of the kernel above at frequency nu (cycles per grid cell).
double kaiser_bessel_ft(double nu, double width, double beta) {
  const double a = std::numbers::pi * width * nu;
  const double arg = beta * beta - a * a;
  if (arg > 1e-12) {
    const double s = std::sqrt(arg);
    return width * std::sinh(s) / s;
  }
  if (arg < -1e-12) {
    const double s = std::sqrt(-arg);
    return width * std::sin(s) / s;
  }
  return width;
}

int wrap(int j, int g) {
  const int r = j % g;
  return r < 0 ? r + g : r;
}

}  // namespace

KernelGrid::KernelGrid(int n, std::span<const Point2> points, double oversampling, int width)
    : g_(static_cast<int>(std::ceil(oversampling * n))), width_(width) {
  if (g_ % 2 != 0) ++g_;
  if (width < 2 || oversampling <= 1.0) {
    throw ConfigError("gridding needs kernel width >= 2 and oversampling > 1");
  }
  const double sigma = static_cast<double>(g_) / n;
  const double w = static_cast<double>(width);
  // Beatty et al. shape parameter.
  beta_ = std::numbers::pi * std::sqrt(w * w / (sigma * sigma) * (sigma - 0.5) * (sigma - 0.5) - 0.8);

  const std::size_t m_count = points.size();
  base_x_.resize(m_count);
  base_y_.resize(m_count);
  weight_x_.resize(m_count * width);
  weight_y_.resize(m_count * width);
  const double half_grid = 0.5 * g_;
  for (std::size_t m = 0; m < m_count; ++m) {
    const double ux = points[m].x * half_grid;
    const double uy = points[m].y * half_grid;
    base_x_[m] = static_cast<int>(std::floor(ux - 0.5 * w)) + 1;
    base_y_[m] = static_cast<int>(std::floor(uy - 0.5 * w)) + 1;
    for (int t = 0; t < width; ++t) {
      weight_x_[m * width + t] = kaiser_bessel(ux - (base_x_[m] + t), w, beta_);
      weight_y_[m * width + t] = kaiser_bessel(uy - (base_y_[m] + t), w, beta_);
    }
  }
}

double KernelGrid::kernel_transform(double coord) const {
  return kaiser_bessel_ft(coord / g_, static_cast<double>(width_), beta_);
}

void KernelGrid::spread(std::span<const cplx> samples, std::span<cplx> grid) const {
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const double* wx = &weight_x_[m * width_];
    const double* wy = &weight_y_[m * width_];
    for (int a = 0; a < width_; ++a) {
      const std::size_t row = static_cast<std::size_t>(wrap(base_y_[m] + a, g_)) * g_;
      const cplx za = samples[m] * wy[a];
      for (int b = 0; b < width_; ++b) grid[row + wrap(base_x_[m] + b, g_)] += za * wx[b];
    }
  }
}

void KernelGrid::interpolate(std::span<const cplx> grid, std::span<cplx> out) const {
  for (std::size_t m = 0; m < out.size(); ++m) {
    const double* wx = &weight_x_[m * width_];
    const double* wy = &weight_y_[m * width_];
    cplx acc = 0.0;
    for (int a = 0; a < width_; ++a) {
      const std::size_t row = static_cast<std::size_t>(wrap(base_y_[m] + a, g_)) * g_;
      cplx line = 0.0;
      for (int b = 0; b < width_; ++b) line += wx[b] * grid[row + wrap(base_x_[m] + b, g_)];
      acc += wy[a] * line;
    }
    out[m] = acc;
  }
}

// Deapodize, zero-pad, FFT on the oversampled grid, then interpolate (and the transpose).
struct NufftOperator::Gridder {
  int n;
  KernelGrid kernel;
  std::vector<double> deapod;  // per-axis correction at pixel index 0..n-1
  fftw_plan plan_forward = nullptr;
  fftw_plan plan_backward = nullptr;

  Gridder(int n_, std::span<const Point2> points, const NufftOptions& opt)
      : n(n_), kernel(n_, points, opt.oversampling, opt.kernel_width) {
    deapod.resize(n);
    for (int i = 0; i < n; ++i) deapod[i] = kernel.kernel_transform(i - n / 2);

    const int g = kernel.grid_size();
    FftwBuffer scratch(static_cast<std::size_t>(g) * g);
    std::lock_guard lock(fftw_planner_mutex());
    plan_forward = fftw_plan_dft_2d(g, g, scratch.data, scratch.data, FFTW_FORWARD,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
    plan_backward = fftw_plan_dft_2d(g, g, scratch.data, scratch.data, FFTW_BACKWARD,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
  }

  ~Gridder() {
    std::lock_guard lock(fftw_planner_mutex());
    if (plan_forward != nullptr) fftw_destroy_plan(plan_forward);
    if (plan_backward != nullptr) fftw_destroy_plan(plan_backward);
  }

  Gridder(const Gridder&) = delete;
  Gridder& operator=(const Gridder&) = delete;

  std::vector<cplx> forward(const ComplexImage& image) const {
    const int g = kernel.grid_size();
    FftwBuffer buf(static_cast<std::size_t>(g) * g);
    const int half = n / 2;
    for (int r = 0; r < n; ++r) {
      const std::size_t row = static_cast<std::size_t>(wrap(r - half, g)) * g;
      for (int c = 0; c < n; ++c) {
        buf[row + wrap(c - half, g)] = image(r, c) / (deapod[r] * deapod[c]);
      }
    }
    fftw_execute_dft(plan_forward, buf.data, buf.data);
    std::vector<cplx> out(kernel.point_count());
    kernel.interpolate(buf.view(), out);
    return out;
  }

  ComplexImage adjoint(std::span<const cplx> samples) const {
    const int g = kernel.grid_size();
    FftwBuffer buf(static_cast<std::size_t>(g) * g);
    kernel.spread(samples, buf.view());
    fftw_execute_dft(plan_backward, buf.data, buf.data);

    ComplexImage out(n);
    const int half = n / 2;
    for (int r = 0; r < n; ++r) {
      const std::size_t row = static_cast<std::size_t>(wrap(r - half, g)) * g;
      for (int c = 0; c < n; ++c) {
        out(r, c) = buf[row + wrap(c - half, g)] / (deapod[r] * deapod[c]);
      }
    }
    return out;
  }
};

NufftOperator::NufftOperator(int n, std::span<const Point2> points, NufftOptions options)
    : n_(n), points_(points.begin(), points.end()) {
  if (n <= 0 || n % 2 != 0) throw ConfigError("NUFFT image size must be positive and even");
  check_points(points_);
  const bool gridding = options.backend == NufftBackend::gridding ||
                        (options.backend == NufftBackend::automatic && n > 32);
  if (gridding) grid_ = std::make_unique<Gridder>(n, points_, options);
}

NufftOperator::~NufftOperator() = default;
NufftOperator::NufftOperator(NufftOperator&&) noexcept = default;
NufftOperator& NufftOperator::operator=(NufftOperator&&) noexcept = default;

std::vector<cplx> NufftOperator::forward(const ComplexImage& image) const {
  if (image.size() != n_) throw ConfigError("image size does not match the NUFFT operator");
  return grid_ ? grid_->forward(image) : forward_direct(image);
}

ComplexImage NufftOperator::adjoint(std::span<const cplx> samples) const {
  if (samples.size() != points_.size()) {
    throw ConfigError("sample count does not match the NUFFT operator");
  }
  return grid_ ? grid_->adjoint(samples) : adjoint_direct(samples);
}

std::vector<cplx> NufftOperator::forward_direct(const ComplexImage& image) const {
  const int half = n_ / 2;
  std::vector<cplx> ex(n_), ey(n_), out(points_.size());
  for (std::size_t m = 0; m < points_.size(); ++m) {
    for (int i = 0; i < n_; ++i) {
      ex[i] = std::polar(1.0, -std::numbers::pi * points_[m].x * (i - half));
      ey[i] = std::polar(1.0, -std::numbers::pi * points_[m].y * (i - half));
    }
    cplx acc = 0.0;
    for (int r = 0; r < n_; ++r) {
      cplx line = 0.0;
      for (int c = 0; c < n_; ++c) line += image(r, c) * ex[c];
      acc += ey[r] * line;
    }
    out[m] = acc;
  }
  return out;
}

ComplexImage NufftOperator::adjoint_direct(std::span<const cplx> samples) const {
  const int half = n_ / 2;
  std::vector<cplx> ex(n_), ey(n_);
  ComplexImage out(n_);
  for (std::size_t m = 0; m < points_.size(); ++m) {
    for (int i = 0; i < n_; ++i) {
      ex[i] = std::polar(1.0, std::numbers::pi * points_[m].x * (i - half));
      ey[i] = std::polar(1.0, std::numbers::pi * points_[m].y * (i - half));
    }
    for (int r = 0; r < n_; ++r) {
      const cplx zr = samples[m] * ey[r];
      for (int c = 0; c < n_; ++c) out(r, c) += zr * ex[c];
    }
  }
  return out;
}

ComplexImage coordinate_weighted(const ComplexImage& image, int axis) {
  const int n = image.size();
  const int half = n / 2;
  ComplexImage out(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double coord = axis == 0 ? c - half : r - half;
      out(r, c) = coord * image(r, c);
    }
  }
  return out;
}

// d(Fx)_m / dk_m^d = -i pi (F(r^d . x))_m.
std::vector<Point2> NufftOperator::position_vjp_forward(const ComplexImage& image,
                                                        std::span<const cplx> cotangent) const {
  if (cotangent.size() != points_.size()) throw ConfigError("cotangent size mismatch");
  const auto fx = forward(coordinate_weighted(image, 0));
  const auto fy = forward(coordinate_weighted(image, 1));
  const cplx minus_i_pi(0.0, -std::numbers::pi);
  std::vector<Point2> grads(points_.size());
  for (std::size_t m = 0; m < points_.size(); ++m) {
    const cplx c = std::conj(cotangent[m]);
    grads[m] = {std::real(c * minus_i_pi * fx[m]), std::real(c * minus_i_pi * fy[m])};
  }
  return grads;
}

// d(F^H z)[n] / dk_m^d = +i pi r_n^d z_m exp(+i pi k_m . n), so the pulled-back
// gradient is Re[+i pi z_m conj(F(r^d . cotangent))_m].
std::vector<Point2> NufftOperator::position_vjp_adjoint(std::span<const cplx> samples,
                                                        const ComplexImage& cotangent) const {
  if (samples.size() != points_.size()) throw ConfigError("sample count mismatch");
  const auto fx = forward(coordinate_weighted(cotangent, 0));
  const auto fy = forward(coordinate_weighted(cotangent, 1));
  const cplx i_pi(0.0, std::numbers::pi);
  std::vector<Point2> grads(points_.size());
  for (std::size_t m = 0; m < points_.size(); ++m) {
    const cplx z = i_pi * samples[m];
    grads[m] = {std::real(z * std::conj(fx[m])), std::real(z * std::conj(fy[m]))};
  }
  return grads;
}

std::vector<cplx> nufft_forward(const ComplexImage& image, std::span<const Point2> points,
                                NufftOptions options) {
  return NufftOperator(image.size(), points, options).forward(image);
}

ComplexImage nufft_adjoint(std::span<const cplx> samples, std::span<const Point2> points, int n,
                           NufftOptions options) {
  return NufftOperator(n, points, options).adjoint(samples);
}

std::vector<Point2> nufft_position_vjp_forward(const ComplexImage& image,
                                               std::span<const Point2> points,
                                               std::span<const cplx> cotangent,
                                               NufftOptions options) {
  return NufftOperator(image.size(), points, options).position_vjp_forward(image, cotangent);
}

std::vector<Point2> nufft_position_vjp_adjoint(std::span<const cplx> samples,
                                               std::span<const Point2> points,
                                               const ComplexImage& cotangent,
                                               NufftOptions options) {
  return NufftOperator(cotangent.size(), points, options).position_vjp_adjoint(samples, cotangent);
}

}  // namespace ktraj
