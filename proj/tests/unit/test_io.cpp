#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "ktraj/io.hpp"
#include "ktraj/phantom.hpp"
#include "test_util.hpp"

using namespace ktraj;
using namespace ktraj::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ktraj_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Trajectory cartesian(int n) {
  Trajectory k(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) k.at(r, c) = {2.0 * (c - n / 2) / n, 2.0 * (r - n / 2) / n};
  }
  return k;
}

}  // namespace

TEST_CASE("trajectory file") {
  const auto dir = scratch("traj");
  std::mt19937_64 rng(8);
  TrajectoryFile f{Trajectory(3, 7, random_points(21, rng)), ImagingGeometry(96, 0.21), {}};
  f.limits.g_max = 31e-3;

  SUBCASE("round trip is bit-exact") {
    write_trajectory(dir / "k.ktrj", f);
    CHECK(fs::file_size(dir / "k.ktrj") == 5 + 4 * 4 + 5 * 8 + 21 * 16);
    const auto g = read_trajectory(dir / "k.ktrj");
    CHECK(g.trajectory.n_shots() == 3);
    CHECK(g.trajectory.n_samples() == 7);
    CHECK(std::equal(g.trajectory.points().begin(), g.trajectory.points().end(),
                     f.trajectory.points().begin()));
    CHECK(g.geometry.matrix_size() == 96);
    CHECK(g.geometry.fov() == 0.21);
    CHECK(g.limits.g_max == 31e-3);
    CHECK(g.limits.dwell_time == f.limits.dwell_time);
  }
  SUBCASE("corrupt files are rejected") {
    write_trajectory(dir / "k.ktrj", f);
    {
      std::ofstream os(dir / "k.ktrj", std::ios::binary | std::ios::app);
      os.put('\0');
    }
    CHECK_THROWS_AS(read_trajectory(dir / "k.ktrj"), ConfigError);
    {
      std::ofstream os(dir / "bad.ktrj", std::ios::binary);
      os << "KTRJ2 garbage";
    }
    CHECK_THROWS_AS(read_trajectory(dir / "bad.ktrj"), ConfigError);
    fs::resize_file(dir / "k.ktrj", 40);
    CHECK_THROWS(read_trajectory(dir / "k.ktrj"));
  }
  SUBCASE("points outside the unit square are refused") {
    f.trajectory.at(0, 0) = {1.5, 0.0};
    CHECK_THROWS_AS(write_trajectory(dir / "k.ktrj", f), DomainError);
  }
}

TEST_CASE("image dataset round trip") {
  const auto dir = scratch("data");
  ImageDataset ds{32, "phantom", phantom_generate(32, 3, 4)};
  write_dataset(dir, ds);
  const auto back = read_dataset(dir);
  CHECK(back.image_size == 32);
  CHECK(back.contrast == "phantom");
  REQUIRE(back.images.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t p = 0; p < ds.images[i].data().size(); ++p) {
      const auto v = ds.images[i].data()[p];
      const auto got = back.images[i].data()[p];
      // Stored as complex64: the read-back value is the float rounding of the original.
      REQUIRE(static_cast<float>(got.real()) == got.real());
      REQUIRE(static_cast<float>(got.real()) == static_cast<float>(v.real()));
      REQUIRE(static_cast<float>(got.imag()) == static_cast<float>(v.imag()));
    }
  }
  fs::resize_file(dir / "image_00001.bin", 100);
  CHECK_THROWS_AS(read_dataset(dir), ConfigError);
}

TEST_CASE("center density") {
  CHECK(center_density(Trajectory(2, 5), 3, 1e-3) == 1.0);

  std::mt19937_64 rng(17);
  const Trajectory uniform(50000, 2, random_points(100000, rng));
  CHECK(center_density(uniform, 1, 0.25) ==
        doctest::Approx(std::numbers::pi * 0.25 * 0.25 / 4).epsilon(0.2));
  CHECK(std::abs(center_density(uniform, 1, 0.25) - 0.0491) <= 0.01);

  const auto radial = radial_init(16, 64, 1.0);
  for (double r : {0.1, 0.25, 0.5, 0.9}) {
    const double frac = center_density(radial, 5, r);
    CHECK(frac > std::numbers::pi * r * r / 4);
    CHECK(frac == doctest::Approx(r).epsilon(0.05));
  }
}

TEST_CASE("summary statistics") {
  const auto s = summarize({4.0, 1.0, 3.0, 2.0});
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.q1 == 1.75);
  CHECK(s.q3 == 3.25);
  CHECK(s.min == 1.0);
  CHECK(s.max == 4.0);
  CHECK(summarize({7.0}).median == 7.0);
  CHECK_THROWS_AS(summarize({}), ConfigError);
}

TEST_CASE("evaluation") {
  SUBCASE("full cartesian grid reproduces every image") {
    const auto images = phantom_generate(32, 3, 5);
    const auto rep = evaluate(cartesian(32), 1, images);
    for (const auto& r : rep.rows) {
      CHECK(r.ssim == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(r.psnr > 80.0);
    }
  }
  SUBCASE("dense radial with density compensation") {
    const auto images = phantom_generate(64, 4, 6);
    const auto rep = evaluate(radial_init(64, 64, 1.0), 5, images);
    CHECK(rep.psnr.mean >= 30.0);
    std::vector<double> ssim;
    for (const auto& r : rep.rows) ssim.push_back(r.ssim);
    CHECK(rep.ssim.median == summarize(ssim).median);

    const auto again = evaluate(radial_init(64, 64, 1.0), 5, images);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      CHECK(again.rows[i].ssim == rep.rows[i].ssim);
      CHECK(again.rows[i].psnr == rep.rows[i].psnr);
    }

    const auto dir = scratch("report");
    write_report(dir, rep);
    std::ifstream csv(dir / "report.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "index,ssim,psnr");
    CHECK(fs::exists(dir / "summary.json"));
  }
  SUBCASE("mixed image sizes are rejected") {
    std::vector<ComplexImage> images{ComplexImage(32), ComplexImage(64)};
    CHECK_THROWS_AS(evaluate(radial_init(4, 8, 0.5), 1, images), ConfigError);
  }
}

TEST_CASE("gradient waveforms") {
  const HardwareLimits limits;
  const ImagingGeometry geom(64, 0.23);
  const auto b = constraint_bounds(limits, geom);

  SUBCASE("constant shot gives zero gradients") {
    Trajectory k(2, 6);
    for (auto& p : k.points()) p = {0.3, -0.2};
    for (const auto& w : gradient_waveforms(k, limits, geom)) {
      CHECK(w.gx == 0.0);
      CHECK(w.gy == 0.0);
    }
  }
  SUBCASE("straight shot at the speed bound runs at g_max") {
    Trajectory k(1, 5);
    const double c = std::cos(0.4);
    const double s = std::sin(0.4);
    for (int i = 0; i < 5; ++i) {
      k.at(0, i) = {(i - 2) * b.speed * c, (i - 2) * b.speed * s};
    }
    for (const auto& w : gradient_waveforms(k, limits, geom)) {
      CHECK(std::hypot(w.gx, w.gy) == doctest::Approx(limits.g_max).epsilon(1e-12));
    }
  }
  SUBCASE("integration reproduces the trajectory") {
    std::mt19937_64 rng(2);
    const auto k = project(Trajectory(4, 32, random_points(128, rng, 0.5)), b).trajectory;
    const auto wf = gradient_waveforms(k, limits, geom);
    std::vector<Point2> starts;
    for (int c = 0; c < 4; ++c) starts.push_back(k.at(c, 0));
    const auto back = integrate_waveforms(wf, starts, 32, limits, geom);
    double worst = 0.0;
    for (std::size_t i = 0; i < k.points().size(); ++i) {
      worst = std::max(worst, norm(back.points()[i] - k.points()[i]));
    }
    CHECK(worst <= 1e-12);
  }
  SUBCASE("infeasible trajectories are refused") {
    const auto k = radial_init(2, 8, 1.0);
    CHECK_THROWS_AS(gradient_waveforms(k, limits, geom), InfeasibleError);
    try {
      export_waveforms(scratch("wf") / "g.csv", k, limits, geom);
    } catch (const InfeasibleError& e) {
      CHECK(e.report().max_speed_violation > 0.0);
    }
  }
}

TEST_CASE("config parsing") {
  const auto c = parse_train_config(R"({
    "geometry": {"matrix_size": 32, "fov": 0.2},
    "limits": {"g_max": 0.03},
    "schedule": {"scheme": "ad", "levels": [2, 1], "steps_per_level": 5, "seed": 9},
    "loss": {"alpha": 0.9},
    "trajectory": {"n_shots": 4, "n_samples": 16}
  })");
  CHECK(c.geometry.matrix_size() == 32);
  CHECK(c.limits.g_max == 0.03);
  CHECK(c.schedule.scheme == Scheme::ad);
  CHECK(c.schedule.levels == std::vector<int>{2, 1});
  CHECK(c.schedule.seed == 9);
  CHECK(c.schedule.batch_size == TrainSchedule::desk().batch_size);
  CHECK(c.loss.alpha == 0.9);
  CHECK(c.n_shots == 4);

  const auto round = parse_train_config(train_config_json(c));
  CHECK(round.schedule.levels == c.schedule.levels);
  CHECK(round.geometry.fov() == c.geometry.fov());

  CHECK(parse_train_config(R"({"schedule": {"preset": "full"}})").schedule.steps_per_level == 250);
  CHECK(parse_train_config("{}").schedule.levels == std::vector<int>{4, 2, 1});
  CHECK_THROWS_AS(parse_train_config(R"({"optimizer": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"schedule": {"lr": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"loss": {"alpha": "high"}})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"schedule": {"levels": [3, 1]}})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("{"), ConfigError);
}
