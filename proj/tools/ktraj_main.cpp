#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ktraj/io.hpp"
#include "ktraj/phantom.hpp"
#include "ktraj/projector.hpp"
#include "ktraj/reconstructor.hpp"
#include "ktraj/trainer.hpp"

namespace fs = std::filesystem;
using namespace ktraj;

namespace {

struct OptimizeArgs {
  std::string config;
  std::string scheme;
  std::string recon;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run_optimize(const OptimizeArgs& a) {
  TrainConfig cfg = load_train_config(a.config);
  cfg.schedule.scheme = parse_scheme(a.scheme);
  const ReconKind recon = parse_recon(a.recon);
  if (a.seed) cfg.schedule.seed = *a.seed;
  cfg.validate();

  const auto ds = read_dataset(a.data);
  if (ds.image_size != cfg.geometry.matrix_size()) {
    throw ConfigError("dataset N = " + std::to_string(ds.image_size) +
                      " does not match the configured matrix size " +
                      std::to_string(cfg.geometry.matrix_size()));
  }
  fs::create_directories(a.out);
  std::ofstream(fs::path(a.out) / "config.json") << train_config_json(cfg) << '\n';

  std::ofstream log(fs::path(a.out) / "train_log.jsonl");
  TrainHooks hooks;
  hooks.log = &log;
  hooks.on_step = [](const StepRecord& r, const Trajectory&) {
    if (r.step % 25 == 0) {
      std::cerr << "step " << r.step << "  level " << r.level << "  " << to_string(r.phase)
                << "  loss " << r.loss << '\n';
    }
  };
  const auto res = run_scheme(cfg, ds.images, recon, hooks);

  write_trajectory(fs::path(a.out) / "trajectory.ktrj", {res.traj, cfg.geometry, cfg.limits});
  if (res.theta) save_params(*res.theta, fs::path(a.out) / "params.bin");
  const auto q = cfg.limits.interp_factor();
  nlohmann::json summary{{"scheme", to_string(cfg.schedule.scheme)},
                         {"recon", to_string(recon)},
                         {"steps", res.steps_run},
                         {"best_step", res.best_step},
                         {"stopped_early", res.stopped_early},
                         {"initial_val_loss", res.initial_val_loss},
                         {"best_val_loss", res.best_val_loss},
                         {"center_density_0.25", center_density(res.traj, q, 0.25)}};
  std::ofstream(fs::path(a.out) / "summary.json") << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int run_evaluate(const std::string& traj_path, const std::string& params_path,
                 const std::string& data, const std::string& out) {
  const auto tf = read_trajectory(traj_path);
  const auto ds = read_dataset(data);
  if (ds.image_size != tf.geometry.matrix_size()) {
    throw ConfigError("trajectory was designed for N = " + std::to_string(tf.geometry.matrix_size()) +
                      " but the dataset has N = " + std::to_string(ds.image_size));
  }
  std::optional<DenoiserParams> theta;
  if (!params_path.empty()) theta = load_params(params_path);
  const auto rep = evaluate(tf.trajectory, tf.limits.interp_factor(), ds.images,
                            theta ? &*theta : nullptr);
  write_report(out, rep);
  std::cout << std::fixed << std::setprecision(4) << "images " << rep.rows.size()
            << "  SSIM mean " << rep.ssim.mean << " median " << rep.ssim.median
            << "  PSNR mean " << rep.psnr.mean << " median " << rep.psnr.median << '\n';
  return 0;
}

int run_project(const std::string& in, const std::string& out) {
  auto tf = read_trajectory(in);
  const auto bounds = constraint_bounds(tf.limits, tf.geometry);
  const auto res = project(tf.trajectory, bounds);
  double moved = 0.0;
  for (std::size_t i = 0; i < res.trajectory.points().size(); ++i) {
    moved = std::max(moved, norm(res.trajectory.points()[i] - tf.trajectory.points()[i]));
  }
  const auto report = check_feasibility(res.trajectory, bounds);
  tf.trajectory = res.trajectory;
  write_trajectory(out, tf);
  std::cout << "max displacement " << moved << "  iterations " << res.max_iterations
            << (res.converged ? "" : "  (not converged)")
            << (report.feasible ? "  feasible" : "  INFEASIBLE") << '\n';
  return report.feasible ? 0 : 1;
}

int run_density(const std::string& in, double radius) {
  const auto tf = read_trajectory(in);
  std::cout << std::setprecision(6) << center_density(tf.trajectory, tf.limits.interp_factor(), radius)
            << '\n';
  return 0;
}

int run_phantom(int n, int count, std::uint64_t seed, const std::string& out) {
  write_dataset(out, {n, "phantom", phantom_generate(n, count, seed)});
  std::cout << "wrote " << count << " phantoms of size " << n << " to " << out << '\n';
  return 0;
}

int run_export(const std::string& in, const std::string& out) {
  const auto tf = read_trajectory(in);
  export_waveforms(out, tf.trajectory, tf.limits, tf.geometry);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hardware-constrained k-space trajectory learning"};
  app.require_subcommand(1);

  OptimizeArgs opt;
  auto* optimize = app.add_subcommand("optimize", "learn a trajectory (and reconstructor)");
  optimize->add_option("--config", opt.config, "JSON config")->required()->check(CLI::ExistingFile);
  optimize->add_option("--scheme", opt.scheme, "learning scheme")
      ->required()->check(CLI::IsMember({"jl", "ad", "hl"}));
  optimize->add_option("--recon", opt.recon, "reconstructor")
      ->required()->check(CLI::IsMember({"dcadj", "denoiser"}));
  optimize->add_option("--data", opt.data, "image dataset directory")->required()->check(CLI::ExistingDirectory);
  optimize->add_option("--out", opt.out, "output directory")->required();
  optimize->add_option("--seed", opt.seed, "override the schedule seed");

  std::string traj, params, data, out;
  auto* eval = app.add_subcommand("evaluate", "retrospective SSIM/PSNR report");
  eval->add_option("--traj", traj)->required()->check(CLI::ExistingFile);
  eval->add_option("--params", params, "denoiser checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", out)->required();

  auto* proj = app.add_subcommand("project", "project a trajectory onto the hardware constraints");
  proj->add_option("--traj", traj)->required()->check(CLI::ExistingFile);
  proj->add_option("--out", out)->required();

  double radius = 0.25;
  auto* dens = app.add_subcommand("density", "fraction of samples within a k-space radius");
  dens->add_option("--traj", traj)->required()->check(CLI::ExistingFile);
  dens->add_option("--radius", radius)->required()->check(CLI::PositiveNumber);

  std::uint32_t n = 64;
  std::uint32_t count = 0;
  std::uint64_t seed = 0;
  auto* phan = app.add_subcommand("phantom", "generate a randomized phantom dataset");
  phan->add_option("--n", n)->required();
  phan->add_option("--count", count)->required();
  phan->add_option("--seed", seed)->required();
  phan->add_option("--out", out)->required();

  auto* exp = app.add_subcommand("export", "write gradient waveforms (T/m) as CSV");
  exp->add_option("--traj", traj)->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*optimize) return run_optimize(opt);
    if (*eval) return run_evaluate(traj, params, data, out);
    if (*proj) return run_project(traj, out);
    if (*dens) return run_density(traj, radius);
    if (*phan) return run_phantom(static_cast<int>(n), static_cast<int>(count), seed, out);
    if (*exp) return run_export(traj, out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
