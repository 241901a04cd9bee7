#include <doctest.h>

#include <fstream>
#include <random>

#include <json.hpp>

#include "ktraj/projector.hpp"
#include "test_util.hpp"

using namespace ktraj;
using namespace ktraj::testing;

namespace {

std::vector<Point2> read_points(const nlohmann::json& arr) {
  std::vector<Point2> out;
  for (const auto& p : arr) out.push_back({p[0].get<double>(), p[1].get<double>()});
  return out;
}

double distance(std::span<const Point2> a, std::span<const Point2> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(norm(a[i] - b[i]), 2);
  return std::sqrt(s);
}

std::vector<Point2> random_shot(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  std::vector<Point2> out(n);
  Point2 p{u(rng), u(rng)};
  for (auto& v : out) {
    p += Point2{d(rng), d(rng)};
    v = p;
  }
  return out;
}

}  // namespace

TEST_CASE("feasibility report") {
  const ConstraintBounds b{0.1, 0.05};
  const std::vector<Point2> constant(5, Point2{0.3, -0.2});
  const auto ok = check_shot_feasibility(constant, b);
  CHECK(ok.feasible);
  CHECK(ok.max_box_violation == 0.0);
  CHECK(ok.max_speed_violation == 0.0);
  CHECK(ok.max_accel_violation == 0.0);

  std::vector<Point2> fast;
  for (int i = 0; i < 6; ++i) fast.push_back({0.11 * i - 0.3, 0.0});
  const auto r = check_shot_feasibility(fast, b);
  CHECK_FALSE(r.feasible);
  CHECK(r.max_speed_violation == doctest::Approx(0.01));
  CHECK(r.max_accel_violation <= 1e-15);

  const auto radial = radial_init(6, 32, 0.9);
  const ConstraintBounds roomy{0.9 * 2.0 / 31.0, 0.01};
  CHECK(check_feasibility(radial, roomy).feasible);
}

TEST_CASE("feasible input is returned unchanged") {
  const auto radial = radial_init(4, 16, 0.5);
  const ConstraintBounds b{0.1, 0.01};
  const auto res = project(radial, b);
  CHECK(res.trajectory == radial);
  CHECK(res.converged);
}

TEST_CASE("constant shot outside the box is clipped") {
  const std::vector<Point2> shot(6, Point2{1.5, 0.0});
  const auto res = project_shot(shot, {0.05, 0.01});
  CHECK(res.converged);
  for (const auto& p : res.points) {
    CHECK(p.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(p.y) < 1e-12);
  }
}

TEST_CASE("matches the conic-solver oracle") {
  std::ifstream in(KTRAJ_TEST_DATA_DIR "/projection_oracle.json");
  REQUIRE(in.good());
  const auto doc = nlohmann::json::parse(in);
  int count = 0;
  for (const auto& c : doc["cases"]) {
    const ConstraintBounds b{c["speed"].get<double>(), c["accel"].get<double>()};
    const auto input = read_points(c["input"]);
    const auto expected = read_points(c["projection"]);
    const auto res = project_shot(input, b);
    CAPTURE(count);
    CHECK(res.converged);
    const double scale = std::max(1.0, distance(expected, std::vector<Point2>(expected.size())));
    CHECK(distance(res.points, expected) / scale <= 1e-6);
    CHECK(check_shot_feasibility(res.points, b, 1e-8).feasible);
    ++count;
  }
  CHECK(count == 62);
}

TEST_CASE("symmetric three-point contraction") {
  // (-d, 0, d) with 2d > speed contracts symmetrically to (-s, 0, s) for s = speed.
  const std::vector<Point2> shot{{-0.2, 0.0}, {0.0, 0.0}, {0.2, 0.0}};
  const auto res = project_shot(shot, {0.1, 0.05});
  CHECK(res.points[0].x == doctest::Approx(-0.1).epsilon(1e-9));
  CHECK(std::abs(res.points[1].x) < 1e-9);
  CHECK(res.points[2].x == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("idempotent, non-expansive and feasible on random shots") {
  std::mt19937_64 rng(17);
  const ConstraintBounds b{0.04, 0.006};
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 8 + trial % 40;
    const auto x = random_shot(rng, n, 0.08);
    const auto y = random_shot(rng, n, 0.08);
    const auto px = project_shot(x, b).points;
    const auto py = project_shot(y, b).points;
    CHECK(check_shot_feasibility(px, b, 1e-8).feasible);
    CHECK(distance(project_shot(px, b).points, px) <= 1e-6);
    CHECK(distance(px, py) <= distance(x, y) + 1e-9);
  }
}

TEST_CASE("rejects non-positive bounds") {
  CHECK_THROWS_AS(project_shot(std::vector<Point2>(3), {0.0, 0.1}), ConfigError);
}
