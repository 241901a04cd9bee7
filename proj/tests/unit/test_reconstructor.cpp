#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ktraj/reconstructor.hpp"
#include "test_util.hpp"

using namespace ktraj;
using namespace ktraj::testing;

namespace {

DenoiserParams random_params(std::mt19937_64& rng, double scale = 0.3) {
  DenoiserParams p = DenoiserParams::init(1);
  std::normal_distribution<double> d(0.0, scale);
  for (auto& v : p.theta) v = d(rng);
  return p;
}

// Explicit nested-loop evaluation, written without the library's flat loops.
ComplexImage naive_denoiser(const DenoiserParams& p, const ComplexImage& img) {
  const int n = img.size();
  using Stack = std::vector<std::vector<std::vector<double>>>;
  Stack a(2, std::vector<std::vector<double>>(n, std::vector<double>(n)));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      a[0][r][c] = img(r, c).real();
      a[1][r][c] = img(r, c).imag();
    }
  }
  const Stack input = a;
  for (int l = 0; l < 3; ++l) {
    const auto s = DenoiserParams::kLayers[l];
    const double* w = p.theta.data() + DenoiserParams::offset(l);
    const double* b = w + s.weight_count();
    Stack out(s.out_channels, std::vector<std::vector<double>>(n, std::vector<double>(n)));
    for (int o = 0; o < s.out_channels; ++o) {
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
          double acc = b[o];
          for (int i = 0; i < s.in_channels; ++i) {
            for (int dy = -1; dy <= 1; ++dy) {
              for (int dx = -1; dx <= 1; ++dx) {
                const int rr = r + dy, cc = c + dx;
                if (rr < 0 || rr >= n || cc < 0 || cc >= n) continue;
                acc += w[((o * s.in_channels + i) * 3 + dy + 1) * 3 + dx + 1] * a[i][rr][cc];
              }
            }
          }
          out[o][r][c] = (l < 2) ? std::max(acc, 0.0) : acc;
        }
      }
    }
    a = std::move(out);
  }
  ComplexImage res(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) res(r, c) = {input[0][r][c] + a[0][r][c], input[1][r][c] + a[1][r][c]};
  }
  return res;
}

double objective(const DenoiserParams& p, const ComplexImage& img, const ComplexImage& cot) {
  return re_inner(cot.data(), denoiser_forward(p, img).data());
}

}  // namespace

TEST_CASE("parameter layout") {
  CHECK(DenoiserParams::size() == 2914);
  CHECK(DenoiserParams::offset(1) == 304);
  CHECK(DenoiserParams::offset(2) == 304 + 2320);
  const auto p = DenoiserParams::init(5);
  CHECK(p.theta == DenoiserParams::init(5).theta);
  CHECK_FALSE(p.theta == DenoiserParams::init(6).theta);
  for (std::size_t k = DenoiserParams::offset(2); k < p.theta.size(); ++k) CHECK(p.theta[k] == 0.0);
}

TEST_CASE("denoiser forward") {
  std::mt19937_64 rng(2);
  const auto img = random_image(12, rng);
  SUBCASE("identity at init") { CHECK(denoiser_forward(DenoiserParams::init(3), img) == img); }
  SUBCASE("zero input with zero biases gives zero") {
    auto p = random_params(rng);
    for (int l = 0; l < 3; ++l) {
      const auto s = DenoiserParams::kLayers[l];
      const std::size_t b = DenoiserParams::offset(l) + s.weight_count();
      for (int o = 0; o < s.out_channels; ++o) p.theta[b + o] = 0.0;
    }
    const auto out = denoiser_forward(p, ComplexImage(8));
    for (const auto& v : out.data()) CHECK(v == cplx(0.0));
  }
  SUBCASE("matches the nested-loop oracle") {
    const auto p = random_params(rng);
    const auto got = denoiser_forward(p, img);
    const auto ref = naive_denoiser(p, img);
    CHECK(rel_err(got.data(), ref.data()) <= 1e-13);
  }
  SUBCASE("wrong parameter count") {
    DenoiserParams p;
    p.theta.resize(10);
    CHECK_THROWS_AS(denoiser_forward(p, img), ConfigError);
  }
}

TEST_CASE("denoiser backward") {
  std::mt19937_64 rng(3);
  const int n = 8;
  const auto img = random_image(n, rng);
  SUBCASE("zero cotangent") {
    const auto g = denoiser_backward(random_params(rng), img, ComplexImage(n));
    for (double v : g.params) CHECK(v == 0.0);
    for (const auto& v : g.input.data()) CHECK(v == cplx(0.0));
  }
  SUBCASE("identity init: input gradient is the cotangent, plus the branch term") {
    const auto p = DenoiserParams::init(4);
    const auto cot = random_image(n, rng);
    const auto g = denoiser_backward(p, img, cot);
    // final layer is zero so the branch contributes nothing to the input gradient
    CHECK(g.input == cot);
    // but the final layer's parameters do receive gradient
    double last = 0.0;
    for (std::size_t k = DenoiserParams::offset(2); k < g.params.size(); ++k) last += std::abs(g.params[k]);
    CHECK(last > 0.0);
  }
  SUBCASE("matches finite differences") {
    const auto p = random_params(rng);
    const auto cot = random_image(n, rng);
    const auto g = denoiser_backward(p, img, cot);
    const double h = 1e-6;

    std::vector<double> analytic, numeric;
    std::uniform_int_distribution<std::size_t> pick(0, p.theta.size() - 1);
    for (int k = 0; k < 60; ++k) {
      const std::size_t idx = pick(rng);
      auto up = p, down = p;
      up.theta[idx] += h;
      down.theta[idx] -= h;
      numeric.push_back((objective(up, img, cot) - objective(down, img, cot)) / (2 * h));
      analytic.push_back(g.params[idx]);
    }
    CHECK(rel_err(analytic, numeric) <= 1e-3);

    analytic.clear();
    numeric.clear();
    for (std::size_t i = 0; i < img.pixel_count(); i += 5) {
      for (const cplx dir : {cplx(1.0, 0.0), cplx(0.0, 1.0)}) {
        auto up = img, down = img;
        up.data()[i] += h * dir;
        down.data()[i] -= h * dir;
        numeric.push_back((objective(p, up, cot) - objective(p, down, cot)) / (2 * h));
        analytic.push_back((std::conj(g.input.data()[i]) * dir).real());
      }
    }
    CHECK(rel_err(analytic, numeric) <= 1e-3);
  }
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(5);
  auto p = random_params(rng);
  p.seed = 1234567890123ULL;
  const auto dir = std::filesystem::temp_directory_path() / "ktraj_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "theta.bin";
  save_params(p, path);
  CHECK(std::filesystem::file_size(path) == DenoiserParams::size() * 8);
  const auto q = load_params(path);
  CHECK(q.theta == p.theta);
  CHECK(q.seed == p.seed);

  // corrupt the sidecar's shapes
  {
    std::ofstream js(path.string() + ".json");
    js << R"({"format":"ktraj-denoiser","count":2914,"seed":1,"layers":[{"in":2,"out":8,"kernel":3},{"in":8,"out":16,"kernel":3},{"in":16,"out":2,"kernel":3}]})";
  }
  CHECK_THROWS_AS(load_params(path), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("dcp adjoint reconstruction") {
  std::mt19937_64 rng(6);
  const int n = 16;
  const auto pts = random_points(50, rng, 0.95);
  const NufftOperator op(n, pts);
  const auto y = random_samples(50, rng);
  std::vector<double> w(50);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : w) v = u(rng);

  SUBCASE("zero samples") {
    const auto img = dcp_adjoint_recon(op, std::vector<cplx>(50), w);
    for (const auto& v : img.data()) CHECK(v == cplx(0.0));
  }
  SUBCASE("equals the adjoint of the weighted samples") {
    std::vector<cplx> wy(50);
    for (int m = 0; m < 50; ++m) wy[m] = w[m] * y[m];
    CHECK(dcp_adjoint_recon(op, y, w) == nufft_adjoint(wy, pts, n));
    CHECK(dcp_adjoint_recon(y, pts, w, n) == dcp_adjoint_recon(op, y, w));
  }
  SUBCASE("sample cotangent matches finite differences") {
    const auto cot = random_image(n, rng);
    const auto g = dcp_adjoint_vjp(op, w, cot);
    const double h = 1e-6;
    std::vector<double> analytic, numeric;
    for (int m = 0; m < 50; m += 3) {
      for (const cplx dir : {cplx(1.0, 0.0), cplx(0.0, 1.0)}) {
        auto up = y, down = y;
        up[m] += h * dir;
        down[m] -= h * dir;
        const double fu = re_inner(cot.data(), dcp_adjoint_recon(op, up, w).data());
        const double fd = re_inner(cot.data(), dcp_adjoint_recon(op, down, w).data());
        numeric.push_back((fu - fd) / (2 * h));
        analytic.push_back((std::conj(g[m]) * dir).real());
      }
    }
    CHECK(rel_err(analytic, numeric) <= 1e-6);
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(dcp_adjoint_recon(op, y, std::vector<double>(3)), ConfigError); }
}
