#include "ktraj/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "ktraj/parallel.hpp"
#include "ktraj/sampling.hpp"

namespace ktraj {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::jl: return "jl";
    case Scheme::ad: return "ad";
    case Scheme::hl: return "hl";
  }
  return "?";
}

std::string to_string(ReconKind r) {
  return r == ReconKind::dcp_adjoint ? "dcadj" : "denoiser";
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::trajectory: return "trajectory";
    case Phase::reconstructor: return "reconstructor";
    case Phase::joint: return "joint";
  }
  return "?";
}

Scheme parse_scheme(const std::string& s) {
  if (s == "jl") return Scheme::jl;
  if (s == "ad") return Scheme::ad;
  if (s == "hl") return Scheme::hl;
  throw ConfigError("unknown scheme '" + s + "' (expected jl, ad or hl)");
}

ReconKind parse_recon(const std::string& s) {
  if (s == "dcadj") return ReconKind::dcp_adjoint;
  if (s == "denoiser") return ReconKind::denoiser;
  throw ConfigError("unknown reconstructor '" + s + "' (expected dcadj or denoiser)");
}

void TrainSchedule::validate() const {
  if (levels.empty() || levels.back() != 1) throw ConfigError("decimation levels must end at 1");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const int f = levels[i];
    if (f < 1 || (f & (f - 1)) != 0) throw ConfigError("decimation levels must be powers of 2");
    if (i > 0 && f >= levels[i - 1]) throw ConfigError("decimation levels must strictly decrease");
  }
  if (steps_per_level < 1 || coarse_block < 1 || ad_recon_steps < 0 || patience < 1 ||
      batch_size < 1 || dc_refresh < 1 || validation_every < 1) {
    throw ConfigError("schedule counts must be at least 1");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  if (!(traj_lr > 0.0) || !(recon_lr > 0.0)) throw ConfigError("learning rates must be positive");
}

TrainSchedule TrainSchedule::desk() { return {}; }

TrainSchedule TrainSchedule::full_scale() {
  TrainSchedule s;
  s.levels = {32, 16, 8, 4, 2, 1};
  s.steps_per_level = 250;
  s.batch_size = 64;
  return s;
}

std::vector<PlanBlock> build_plan(const TrainSchedule& sch, ReconKind recon) {
  sch.validate();
  const bool trainable = recon == ReconKind::denoiser;
  const int nds = sch.steps_per_level;
  std::vector<PlanBlock> plan;
  auto alternate = [&](int level, int block) {
    int done = 0;
    bool traj_turn = true;
    while (done < nds) {
      const int len = std::min(block, nds - done);
      plan.push_back({level, traj_turn ? Phase::trajectory : Phase::reconstructor, len, recon});
      done += len;
      traj_turn = !traj_turn;
    }
  };

  for (int f : sch.levels) {
    if (!trainable) {
      plan.push_back({f, Phase::trajectory, nds, recon});
      continue;
    }
    switch (sch.scheme) {
      case Scheme::jl:
        plan.push_back({f, Phase::joint, nds, recon});
        break;
      case Scheme::ad:
        plan.push_back({f, Phase::trajectory, nds, ReconKind::dcp_adjoint});
        break;
      case Scheme::hl:
        if (f >= 4) {
          alternate(f, sch.coarse_block);
        } else if (f == 2) {
          alternate(f, (nds + 1) / 2);
        } else {
          plan.push_back({f, Phase::joint, nds, recon});
        }
        break;
    }
  }
  if (trainable && sch.scheme == Scheme::ad) {
    plan.push_back({1, Phase::reconstructor, sch.ad_recon_steps > 0 ? sch.ad_recon_steps : nds, recon});
  }
  return plan;
}

ConstraintBounds level_bounds(ConstraintBounds full, int full_samples, int level_samples) {
  if (level_samples < 2 || level_samples > full_samples) throw ConfigError("invalid level size");
  const double r = static_cast<double>(full_samples - 1) / static_cast<double>(level_samples - 1);
  return {full.speed * r, full.accel * r};
}

ForwardModel::ForwardModel(int image_size, int full_samples, int q, NufftOptions nufft,
                           DensityOptions density)
    : n_(image_size), full_samples_(full_samples), q_(q), nufft_(nufft), density_(density) {
  if (image_size <= 0 || image_size % 2 != 0) throw ConfigError("image size must be even");
  if (full_samples < 2 || q < 1) throw ConfigError("invalid forward-model shape");
}

ShotResampler ForwardModel::expansion(int level_samples) const {
  return ShotResampler::compose(ShotResampler(level_samples, full_samples_),
                                ShotResampler(full_samples_, full_samples_ * q_));
}

std::vector<Point2> ForwardModel::sample_points(const Trajectory& traj) const {
  return resample_shots(expansion(traj.n_samples()), traj.points(), traj.n_shots());
}

std::vector<Point2> ForwardModel::pull_back(std::span<const Point2> point_grads, int n_shots,
                                            int level_samples) const {
  return resample_shots_transpose(expansion(level_samples), point_grads, n_shots);
}

std::vector<double> ForwardModel::density(std::span<const Point2> points) const {
  return pipe_weights(points, n_, density_, nufft_);
}

namespace {

struct ItemResult {
  double loss = 0.0;
  std::vector<Point2> point_grad;
  std::vector<double> theta_grad;
};

void check_batch(std::span<const ComplexImage> batch, int n) {
  if (batch.empty()) throw ConfigError("empty batch");
  for (const auto& img : batch) {
    if (img.size() != n) throw ConfigError("image size does not match the forward model");
  }
}

}  // namespace

PipelineResult pipeline_gradient(const ForwardModel& model, const Trajectory& traj,
                                 std::span<const ComplexImage> batch,
                                 std::span<const double> weights, const DenoiserParams* theta,
                                 LossWeights loss, bool want_traj, bool want_theta) {
  check_batch(batch, model.image_size());
  const auto points = model.sample_points(traj);
  if (weights.size() != points.size()) throw ConfigError("density weights do not match the samples");
  const NufftOperator op(model.image_size(), points, model.nufft_options());
  want_theta = want_theta && theta != nullptr;

  std::vector<ItemResult> items(batch.size());
  parallel_for(static_cast<int>(batch.size()), [&](int i) {
    const ComplexImage& x = batch[i];
    auto y = op.forward(x);
    for (std::size_t m = 0; m < y.size(); ++m) y[m] *= weights[m];  // y <- w . F x
    const ComplexImage x_dc = op.adjoint(y);
    const ComplexImage x_hat = theta != nullptr ? denoiser_forward(*theta, x_dc) : x_dc;
    ItemResult& out = items[i];
    out.loss = combined_loss(x, x_hat, loss);
    if (!want_traj && !want_theta) return;

    const ComplexImage g = combined_loss_grad(x, x_hat, loss);
    ComplexImage g_dc = g;
    if (theta != nullptr) {
      auto back = denoiser_backward(*theta, x_dc, g);
      if (want_theta) out.theta_grad = std::move(back.params);
      g_dc = std::move(back.input);
    }
    if (!want_traj) return;
    // Path through y = F x (weights frozen) and path through F^H.
    const auto y_cot = dcp_adjoint_vjp(op, weights, g_dc);
    out.point_grad = op.position_vjp_forward(x, y_cot);
    const auto adj = op.position_vjp_adjoint(y, g_dc);
    for (std::size_t m = 0; m < adj.size(); ++m) out.point_grad[m] += adj[m];
  });

  PipelineResult res;
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<Point2> point_sum(want_traj ? points.size() : 0);
  if (want_theta) res.theta_grad.assign(theta->theta.size(), 0.0);
  for (const auto& it : items) {
    res.loss += it.loss;
    if (want_traj) {
      for (std::size_t m = 0; m < point_sum.size(); ++m) point_sum[m] += it.point_grad[m];
    }
    if (want_theta) {
      for (std::size_t k = 0; k < res.theta_grad.size(); ++k) res.theta_grad[k] += it.theta_grad[k];
    }
  }
  res.loss *= inv;
  if (!std::isfinite(res.loss)) throw NonFiniteError("non-finite training loss");
  if (want_traj) {
    for (auto& p : point_sum) p = inv * p;
    res.traj_grad = model.pull_back(point_sum, traj.n_shots(), traj.n_samples());
  }
  for (auto& v : res.theta_grad) v *= inv;
  return res;
}

double pipeline_loss(const ForwardModel& model, const Trajectory& traj,
                     std::span<const ComplexImage> batch, std::span<const double> weights,
                     const DenoiserParams* theta, LossWeights loss) {
  return pipeline_gradient(model, traj, batch, weights, theta, loss, false, false).loss;
}

namespace {

std::vector<double> flatten(std::span<const Point2> pts) {
  std::vector<double> out(2 * pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out[2 * i] = pts[i].x;
    out[2 * i + 1] = pts[i].y;
  }
  return out;
}

std::vector<Point2> unflatten(std::span<const double> v) {
  std::vector<Point2> out(v.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

// ADAM on the control points followed by projection onto the level's constraint set.
ProjectionResult update_trajectory(const Trajectory& traj, std::span<const Point2> grad,
                                   ConstraintBounds bounds, OptimState& state) {
  auto params = flatten(traj.points());
  const auto g = flatten(grad);
  adam_step(state, params, g);
  return project(Trajectory(traj.n_shots(), traj.n_samples(), unflatten(params)), bounds);
}

}  // namespace

TrajectoryStep trajectory_step(const ForwardModel& model, const Trajectory& traj,
                               std::span<const ComplexImage> batch,
                               std::span<const double> weights, const DenoiserParams* theta,
                               LossWeights loss, ConstraintBounds bounds, OptimState& state) {
  const auto pg = pipeline_gradient(model, traj, batch, weights, theta, loss, true, false);
  auto proj = update_trajectory(traj, pg.traj_grad, bounds, state);
  const auto report = check_feasibility(proj.trajectory, bounds);
  return {std::move(proj.trajectory), pg.loss, report};
}

void TrainConfig::validate() const {
  limits.validate();
  schedule.validate();
  loss.validate();
  if (n_shots < 1 || n_samples < 2) throw ConfigError("trajectory needs Nc >= 1 and Ns >= 2");
  for (int f : schedule.levels) {
    if (n_samples % f != 0 || n_samples / f < 2) {
      throw ConfigError("decimation factor " + std::to_string(f) + " does not fit Ns = " +
                        std::to_string(n_samples));
    }
  }
}

namespace {

nlohmann::json feasibility_json(const FeasibilityReport& r) {
  return {{"feasible", r.feasible},
          {"max_box", r.max_box_violation},
          {"max_speed", r.max_speed_violation},
          {"max_accel", r.max_accel_violation}};
}

// Cycles through shuffled epochs of the training indices.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> indices, std::uint64_t seed)
      : indices_(std::move(indices)), rng_(seed) {
    reshuffle();
  }

  std::vector<ComplexImage> next(std::span<const ComplexImage> data, int size) {
    std::vector<ComplexImage> batch;
    batch.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
      if (pos_ == order_.size()) reshuffle();
      batch.push_back(data[order_[pos_++]]);
    }
    return batch;
  }

 private:
  void reshuffle() {
    order_ = indices_;
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  std::vector<std::size_t> indices_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace

TrainResult run_scheme(const TrainConfig& config, std::span<const ComplexImage> dataset,
                       ReconKind recon, const TrainHooks& hooks) {
  config.validate();
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  const int n = config.geometry.matrix_size();
  for (const auto& img : dataset) {
    if (img.size() != n) throw ConfigError("dataset image size does not match the geometry");
  }
  const auto& sch = config.schedule;
  const auto full_bounds = constraint_bounds(config.limits, config.geometry);
  const ForwardModel model(n, config.n_samples, config.limits.interp_factor(), config.nufft,
                           config.density);

  // 90/10 split on a seeded permutation; a single image serves both roles.
  std::mt19937_64 split_rng(sch.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_val = static_cast<std::size_t>(std::lround(sch.validation_fraction * dataset.size()));
  n_val = std::clamp<std::size_t>(n_val, 1, dataset.size() > 1 ? dataset.size() - 1 : 1);
  std::vector<ComplexImage> val;
  for (std::size_t i = 0; i < n_val; ++i) val.push_back(dataset[order[i]]);
  std::vector<std::size_t> train_idx(order.begin() + (dataset.size() > 1 ? n_val : 0), order.end());
  BatchSampler sampler(std::move(train_idx), sch.seed + 1);

  const auto plan = build_plan(sch, recon);
  std::optional<DenoiserParams> theta;
  if (recon == ReconKind::denoiser) theta = DenoiserParams::init(sch.seed);
  OptimState theta_state(theta ? theta->theta.size() : 0, sch.recon_lr);

  const Trajectory initial = radial_init(config.n_shots, config.n_samples, config.init_span, &full_bounds);
  auto emit = [&](const nlohmann::json& j) {
    if (hooks.log != nullptr) *hooks.log << j.dump() << '\n';
  };
  auto validation_loss = [&](const Trajectory& k, const DenoiserParams* th) {
    const auto pts = model.sample_points(k);
    return pipeline_loss(model, k, val, model.density(pts), th, config.loss);
  };

  TrainResult result{initial, theta};
  result.initial_val_loss = validation_loss(initial, nullptr);
  result.best_val_loss = std::numeric_limits<double>::infinity();
  emit({{"event", "start"},
        {"scheme", to_string(sch.scheme)},
        {"recon", to_string(recon)},
        {"train_images", dataset.size() > 1 ? dataset.size() - n_val : 1},
        {"val_images", n_val},
        {"speed_bound", full_bounds.speed},
        {"accel_bound", full_bounds.accel},
        {"val_loss", result.initial_val_loss}});

  const auto t0 = std::chrono::steady_clock::now();
  Trajectory k = initial;
  int level = 0;
  ConstraintBounds bounds = full_bounds;
  OptimState traj_state;
  std::vector<double> weights;
  int since_refresh = 0;
  int step = 0;
  bool stop = false;
  bool have_best = false;
  double last_val = result.initial_val_loss;

  for (std::size_t b = 0; b < plan.size() && !stop; ++b) {
    const PlanBlock& block = plan[b];
    if (block.level != level) {
      const int ns_level = config.n_samples / block.level;
      k = level == 0 ? multires_decimate(initial, block.level)
                     : multires_upsample(k, level / block.level);
      bounds = level_bounds(full_bounds, config.n_samples, ns_level);
      auto proj = project(k, bounds);
      k = std::move(proj.trajectory);
      level = block.level;
      traj_state = OptimState(2 * k.size(), sch.traj_lr);
      weights = model.density(model.sample_points(k));
      since_refresh = 0;
      emit({{"event", "level"},
            {"step", step},
            {"level", level},
            {"samples_per_shot", ns_level},
            {"speed_bound", bounds.speed},
            {"accel_bound", bounds.accel}});
    }
    emit({{"event", "block"},
          {"step", step},
          {"level", level},
          {"phase", to_string(block.phase)},
          {"steps", block.steps},
          {"recon", to_string(block.recon)}});
    const DenoiserParams* active = block.recon == ReconKind::denoiser ? &*theta : nullptr;

    for (int s = 0; s < block.steps && !stop; ++s) {
      ++step;
      const auto batch = sampler.next(dataset, sch.batch_size);
      if (since_refresh >= sch.dc_refresh) {
        weights = model.density(model.sample_points(k));
        since_refresh = 0;
      }
      StepRecord rec;
      rec.step = step;
      rec.level = level;
      rec.phase = block.phase;
      const bool move_k = block.phase != Phase::reconstructor;
      const bool move_theta = block.phase != Phase::trajectory && active != nullptr;
      const auto pg = pipeline_gradient(model, k, batch, weights, active, config.loss, move_k, move_theta);
      rec.loss = pg.loss;
      if (move_theta) radam_step(theta_state, theta->theta, pg.theta_grad);
      if (move_k) {
        auto proj = update_trajectory(k, pg.traj_grad, bounds, traj_state);
        rec.projection_converged = proj.converged;
        k = std::move(proj.trajectory);
        ++since_refresh;
      }
      rec.level_feasibility = check_feasibility(k, bounds);
      const ShotResampler to_full(k.n_samples(), config.n_samples);
      const Trajectory full(k.n_shots(), config.n_samples,
                            resample_shots(to_full, k.points(), k.n_shots()));
      rec.full_feasibility = check_feasibility(full, full_bounds);
      if (sch.record_wall_time) {
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      nlohmann::json j{{"step", rec.step},
                       {"level", rec.level},
                       {"phase", to_string(rec.phase)},
                       {"loss", rec.loss},
                       {"feasibility", feasibility_json(rec.level_feasibility)},
                       {"full_feasibility", feasibility_json(rec.full_feasibility)},
                       {"projection_converged", rec.projection_converged}};
      if (sch.record_wall_time) j["wall_time"] = rec.wall_time;
      emit(j);
      if (hooks.on_step) hooks.on_step(rec, k);

      const bool last = b + 1 == plan.size() && s + 1 == block.steps;
      if (step % sch.validation_every == 0 || last) {
        last_val = validation_loss(k, active);
        emit({{"event", "validation"}, {"step", step}, {"level", level}, {"val_loss", last_val}});
        if (level == 1) {
          if (!have_best || last_val < result.best_val_loss) {
            have_best = true;
            result.best_val_loss = last_val;
            result.best_step = step;
            result.traj = k;
            result.theta = theta;
          } else if (step - result.best_step >= sch.patience) {
            stop = true;
            result.stopped_early = true;
          }
        }
      }
    }
  }
  if (!have_best) {
    result.traj = k;
    result.theta = theta;
    result.best_val_loss = last_val;
    result.best_step = step;
  }
  result.steps_run = step;
  result.final_val_loss = result.best_val_loss;
  emit({{"event", "end"},
        {"steps", step},
        {"best_step", result.best_step},
        {"best_val_loss", result.best_val_loss},
        {"initial_val_loss", result.initial_val_loss},
        {"stopped_early", result.stopped_early}});
  return result;
}

}  // namespace ktraj
