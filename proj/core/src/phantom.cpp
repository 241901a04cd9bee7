#include "ktraj/phantom.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace ktraj {
namespace {

struct Ellipse {
  double intensity;
  double a;  // semi-axis along x
  double b;  // semi-axis along y
  double x0;
  double y0;
  double phi_deg;
};

// Toft's modified Shepp-Logan parameters.
constexpr std::array<Ellipse, 10> kSheppLogan{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
    {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
}};

// Portable uniform draw; std::uniform_real_distribution output is implementation-defined.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

ComplexImage render(int n, std::mt19937_64& rng, const PhantomOptions& options) {
  std::array<Ellipse, kSheppLogan.size()> ellipses = kSheppLogan;
  double scale = 1.0;
  double rotation = 0.0;
  if (options.randomize) {
    scale = uniform(rng, 0.85, 1.0);
    rotation = uniform(rng, -15.0, 15.0);
    for (std::size_t e = 0; e < ellipses.size(); ++e) {
      auto& el = ellipses[e];
      // The outer skull pair keeps its shape so the inner ellipses stay enclosed.
      if (e >= 2) {
        el.x0 += uniform(rng, -0.03, 0.03);
        el.y0 += uniform(rng, -0.03, 0.03);
        el.a *= uniform(rng, 0.85, 1.15);
        el.b *= uniform(rng, 0.85, 1.15);
        el.phi_deg += uniform(rng, -10.0, 10.0);
        el.intensity *= uniform(rng, 0.7, 1.3);
      }
    }
  }

  std::array<double, 6> phase_coeff{};
  if (!options.zero_phase) {
    for (auto& c : phase_coeff) c = uniform(rng, -0.5, 0.5) * std::numbers::pi;
  }

  const double rot = rotation * std::numbers::pi / 180.0;
  const double cr = std::cos(rot);
  const double sr = std::sin(rot);
  const int ss = std::max(1, options.supersample);
  const double half = 0.5 * n;

  ComplexImage img(n);
  double peak = 0.0;
  std::vector<double> mag(static_cast<std::size_t>(n) * n, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double acc = 0.0;
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const double px = (c - half + (sx + 0.5) / ss - 0.5) / half;
          const double py = -(r - half + (sy + 0.5) / ss - 0.5) / half;
          // Rotate and scale the sampling point into phantom coordinates.
          const double x = (cr * px + sr * py) / scale;
          const double y = (-sr * px + cr * py) / scale;
          double v = 0.0;
          for (const auto& el : ellipses) {
            const double phi = el.phi_deg * std::numbers::pi / 180.0;
            const double dx = x - el.x0;
            const double dy = y - el.y0;
            const double u = (dx * std::cos(phi) + dy * std::sin(phi)) / el.a;
            const double w = (-dx * std::sin(phi) + dy * std::cos(phi)) / el.b;
            if (u * u + w * w <= 1.0) v += el.intensity;
          }
          acc += v;
        }
      }
      const double m = std::max(0.0, acc / (ss * ss));
      mag[static_cast<std::size_t>(r) * n + c] = m;
      peak = std::max(peak, m);
    }
  }

  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double x = (c - half) / half;
      const double y = -(r - half) / half;
      const double phase = phase_coeff[0] + phase_coeff[1] * x + phase_coeff[2] * y +
                           phase_coeff[3] * x * y + phase_coeff[4] * x * x +
                           phase_coeff[5] * y * y;
      const double m = peak > 0.0 ? mag[static_cast<std::size_t>(r) * n + c] / peak : 0.0;
      img(r, c) = options.zero_phase ? cplx(m, 0.0) : std::polar(m, phase);
    }
  }
  return img;
}

}  // namespace

ComplexImage shepp_logan(int n, std::uint64_t seed, PhantomOptions options) {
  if (n < 2 || n % 2 != 0) throw ConfigError("phantom size must be positive and even");
  std::mt19937_64 rng(seed);
  return render(n, rng, options);
}

std::vector<ComplexImage> phantom_generate(int n, int count, std::uint64_t seed,
                                           PhantomOptions options) {
  if (n < 32 || n % 2 != 0) throw ConfigError("phantom datasets need an even N >= 32");
  if (count < 1) throw ConfigError("phantom count must be positive");
  std::mt19937_64 rng(seed);
  std::vector<ComplexImage> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(render(n, rng, options));
  return out;
}

}  // namespace ktraj
