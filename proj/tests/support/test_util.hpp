#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "ktraj/geometry.hpp"

namespace ktraj::testing {

inline ComplexImage random_image(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  ComplexImage img(n);
  for (auto& v : img.data()) v = {d(rng), d(rng)};
  return img;
}

inline std::vector<cplx> random_samples(std::size_t m, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<cplx> out(m);
  for (auto& v : out) v = {d(rng), d(rng)};
  return out;
}

inline std::vector<Point2> random_points(std::size_t m, std::mt19937_64& rng, double extent = 1.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Point2> out(m);
  for (auto& p : out) p = {u(rng), u(rng)};
  return out;
}

// Brute-force double sum, independent of the library's direct backend.
inline std::vector<cplx> dft_oracle(const ComplexImage& img, std::span<const Point2> pts) {
  const int n = img.size();
  std::vector<cplx> out(pts.size());
  for (std::size_t m = 0; m < pts.size(); ++m) {
    cplx acc = 0.0;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double phase =
            -std::numbers::pi * (pts[m].x * (c - n / 2) + pts[m].y * (r - n / 2));
        acc += img(r, c) * std::polar(1.0, phase);
      }
    }
    out[m] = acc;
  }
  return out;
}

inline double rel_err(std::span<const cplx> a, std::span<const cplx> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

inline double rel_err(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

inline double re_inner(std::span<const cplx> a, std::span<const cplx> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (std::conj(a[i]) * b[i]).real();
  return acc;
}

inline std::vector<double> flatten(std::span<const Point2> pts) {
  std::vector<double> out;
  out.reserve(2 * pts.size());
  for (const auto& p : pts) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  return out;
}

}  // namespace ktraj::testing
