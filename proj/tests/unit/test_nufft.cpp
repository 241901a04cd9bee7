#include <doctest.h>

#include <random>

#include "ktraj/nufft.hpp"
#include "test_util.hpp"

using namespace ktraj;
using namespace ktraj::testing;

namespace {

NufftOptions with_backend(NufftBackend b) {
  NufftOptions o;
  o.backend = b;
  return o;
}

// Central differences of f(points) along every coordinate of every point.
template <class F>
std::vector<double> fd_gradient(std::vector<Point2> pts, F&& f, double h = 1e-5) {
  std::vector<double> g;
  for (auto& p : pts) {
    for (double* c : {&p.x, &p.y}) {
      const double keep = *c;
      *c = keep + h;
      const double up = f(pts);
      *c = keep - h;
      const double down = f(pts);
      *c = keep;
      g.push_back((up - down) / (2.0 * h));
    }
  }
  return g;
}

}  // namespace

TEST_CASE("forward trivial cases") {
  const std::vector<Point2> origin{{0.0, 0.0}};
  ComplexImage zero(8);
  for (const auto& v : nufft_forward(zero, origin)) CHECK(v == cplx(0.0));

  ComplexImage c(16);
  for (auto& v : c.data()) v = {0.5, -2.0};
  const auto y = nufft_forward(c, origin, with_backend(NufftBackend::gridding));
  CHECK(std::abs(y[0] - cplx(0.5, -2.0) * 256.0) < 1e-5 * 256.0 * std::abs(cplx(0.5, -2.0)));
}

TEST_CASE("adjoint trivial cases") {
  const std::vector<Point2> origin{{0.0, 0.0}};
  const std::vector<cplx> one{1.0};
  const auto exact = nufft_adjoint(one, origin, 16, with_backend(NufftBackend::direct));
  for (const auto& v : exact.data()) CHECK(std::abs(v - cplx(1.0)) < 1e-14);
  // Gridding: a lone sample concentrates the kernel error; bound it in norm.
  const auto gridded = nufft_adjoint(one, origin, 16, with_backend(NufftBackend::gridding));
  CHECK(rel_err(gridded.data(), exact.data()) <= 1e-5);
  const std::vector<cplx> zero(3);
  const auto img = nufft_adjoint(zero, std::vector<Point2>(3), 8);
  for (const auto& v : img.data()) CHECK(v == cplx(0.0));
}

TEST_CASE("forward matches the direct sum for both backends") {
  std::mt19937_64 rng(11);
  for (int n : {8, 16, 32, 64}) {
    const auto img = random_image(n, rng);
    const auto pts = random_points(40, rng);
    const auto ref = dft_oracle(img, pts);
    for (auto backend : {NufftBackend::direct, NufftBackend::gridding}) {
      CAPTURE(n);
      CHECK(rel_err(nufft_forward(img, pts, with_backend(backend)), ref) <= 1e-5);
    }
  }
}

TEST_CASE("forward at Cartesian grid points is the plain DFT") {
  std::mt19937_64 rng(3);
  const int n = 16;
  const auto img = random_image(n, rng);
  std::vector<Point2> grid;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) grid.push_back({2.0 * (c - n / 2) / n, 2.0 * (r - n / 2) / n});
  }
  const auto ref = dft_oracle(img, grid);
  CHECK(rel_err(nufft_forward(img, grid, with_backend(NufftBackend::gridding)), ref) <= 1e-5);
}

TEST_CASE("adjointness identity over random sizes") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> count(1, 64);
  for (int trial = 0; trial < 24; ++trial) {
    const int n = 8 << (trial % 3);
    const auto pts = random_points(static_cast<std::size_t>(count(rng)), rng);
    const auto x = random_image(n, rng);
    const auto z = random_samples(pts.size(), rng);
    for (auto backend : {NufftBackend::direct, NufftBackend::gridding}) {
      const NufftOperator op(n, pts, with_backend(backend));
      const auto fx = op.forward(x);
      const auto fhz = op.adjoint(z);
      cplx lhs = 0.0;
      for (std::size_t m = 0; m < z.size(); ++m) lhs += std::conj(fx[m]) * z[m];
      cplx rhs = 0.0;
      for (std::size_t i = 0; i < x.pixel_count(); ++i) rhs += std::conj(x.data()[i]) * fhz.data()[i];
      double nfx = 0.0;
      double nz = 0.0;
      for (const auto& v : fx) nfx += std::norm(v);
      for (const auto& v : z) nz += std::norm(v);
      CHECK(std::abs(lhs - rhs) / std::sqrt(nfx * nz) <= 1e-6);
    }
  }
}

TEST_CASE("out of domain points are rejected") {
  const std::vector<Point2> bad{{1.01, 0.0}};
  CHECK_THROWS_AS(nufft_forward(ComplexImage(8), bad), DomainError);
  CHECK_THROWS_AS(nufft_adjoint(std::vector<cplx>(1), bad, 8), DomainError);
}

TEST_CASE("forward position VJP") {
  std::mt19937_64 rng(21);
  SUBCASE("zero cotangent gives zero gradient") {
    const auto pts = random_points(5, rng);
    const auto g = nufft_position_vjp_forward(random_image(8, rng), pts, std::vector<cplx>(5));
    for (const auto& p : g) CHECK(p == Point2{});
  }
  SUBCASE("delta at the origin pixel gives zero gradient") {
    ComplexImage delta(8);
    delta(4, 4) = 1.0;
    const auto pts = random_points(5, rng);
    const auto g = nufft_position_vjp_forward(delta, pts, random_samples(5, rng));
    for (const auto& p : g) CHECK(norm(p) < 1e-12);
  }
  SUBCASE("matches finite differences") {
    for (int n : {8, 16, 64}) {
      for (auto backend : {NufftBackend::direct, NufftBackend::gridding}) {
        const auto x = random_image(n, rng);
        const auto pts = random_points(6, rng, 0.9);
        const auto c = random_samples(6, rng);
        const auto opts = with_backend(backend);
        const auto g = flatten(nufft_position_vjp_forward(x, pts, c, opts));
        const auto fd = fd_gradient(pts, [&](const std::vector<Point2>& p) {
          return re_inner(c, nufft_forward(x, p, opts));
        });
        CAPTURE(n);
        CHECK(rel_err(g, fd) <= 1e-3);
      }
    }
  }
}

TEST_CASE("adjoint position VJP") {
  std::mt19937_64 rng(22);
  SUBCASE("zero cotangent or zero samples give zero gradient") {
    const auto pts = random_points(5, rng);
    for (const auto& p : nufft_position_vjp_adjoint(random_samples(5, rng), pts, ComplexImage(8))) {
      CHECK(p == Point2{});
    }
    for (const auto& p :
         nufft_position_vjp_adjoint(std::vector<cplx>(5), pts, random_image(8, rng))) {
      CHECK(p == Point2{});
    }
  }
  SUBCASE("matches finite differences") {
    for (int n : {8, 16, 64}) {
      for (auto backend : {NufftBackend::direct, NufftBackend::gridding}) {
        const auto z = random_samples(6, rng);
        const auto pts = random_points(6, rng, 0.9);
        const auto cot = random_image(n, rng);
        const auto opts = with_backend(backend);
        const auto g = flatten(nufft_position_vjp_adjoint(z, pts, cot, opts));
        const auto fd = fd_gradient(pts, [&](const std::vector<Point2>& p) {
          const auto img = nufft_adjoint(z, p, n, opts);
          return re_inner(cot.data(), img.data());
        });
        CAPTURE(n);
        CHECK(rel_err(g, fd) <= 1e-3);
      }
    }
  }
}

TEST_CASE("kernel grid spread and interpolate are adjoint") {
  std::mt19937_64 rng(8);
  const auto pts = random_points(30, rng);
  const KernelGrid kg(16, pts, 2.0, 6);
  const std::size_t cells = static_cast<std::size_t>(kg.grid_size()) * kg.grid_size();
  const auto s = random_samples(pts.size(), rng);
  const auto grid_in = random_samples(cells, rng);
  std::vector<cplx> spread(cells);
  kg.spread(s, spread);
  std::vector<cplx> interp(pts.size());
  kg.interpolate(grid_in, interp);
  const double a = re_inner(spread, grid_in);
  const double b = re_inner(s, interp);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}
