#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ktraj/density.hpp"
#include "ktraj/geometry.hpp"
#include "ktraj/nufft.hpp"
#include "ktraj/objective.hpp"
#include "ktraj/optim.hpp"
#include "ktraj/projector.hpp"
#include "ktraj/reconstructor.hpp"
#include "ktraj/sampling.hpp"

namespace ktraj {

enum class Scheme { jl, ad, hl };
enum class ReconKind { dcp_adjoint, denoiser };
/// What a step updates: the trajectory, the reconstructor parameters, or both.
enum class Phase { trajectory, reconstructor, joint };

std::string to_string(Scheme s);
std::string to_string(ReconKind r);
std::string to_string(Phase p);
Scheme parse_scheme(const std::string& s);
ReconKind parse_recon(const std::string& s);

struct TrainSchedule {
  std::vector<int> levels{4, 2, 1};  // decimation factors, strictly decreasing powers of 2
  int steps_per_level = 100;         // N_ds
  Scheme scheme = Scheme::hl;
  int coarse_block = 20;             // HL alternation block at factors >= 4
  int ad_recon_steps = 0;            // reconstructor phase of AD; 0 means N_ds
  int patience = 100;                // early stopping on validation loss (level 1 only)
  int batch_size = 8;
  int dc_refresh = 10;               // trajectory steps between density recomputations
  int validation_every = 10;
  double validation_fraction = 0.1;
  double traj_lr = 1e-3;
  double recon_lr = 1e-3;
  std::uint64_t seed = 0;
  bool record_wall_time = true;      // off for bitwise-reproducible logs

  void validate() const;

  /// N = 64 desk defaults: levels [4, 2, 1], N_ds = 100.
  static TrainSchedule desk();
  /// Six dyadic levels [32 .. 1], N_ds = 250, batch 64.
  static TrainSchedule full_scale();
};

struct PlanBlock {
  int level;
  Phase phase;
  int steps;
  /// Reconstructor used while the block runs (AD trains K with the DCp adjoint first).
  ReconKind recon;
};

/// Step-by-step structure of a run: HL alternates K-only and theta-only blocks of
/// `coarse_block` steps at factors >= 4 and of N_ds/2 steps at factor 2, then trains
/// jointly at factor 1. AD trains K at every level with the DCp adjoint, then theta at
/// full resolution. JL trains jointly throughout. Without trainable parameters every
/// block is a trajectory block.
std::vector<PlanBlock> build_plan(const TrainSchedule& schedule, ReconKind recon);

/// Per-step bounds for a shot decimated to `level_samples` points. Scaling both bounds
/// by r = (Ns - 1) / (Ns_d - 1) makes the linear expansion to Ns points satisfy the
/// full-resolution bounds exactly.
ConstraintBounds level_bounds(ConstraintBounds full, int full_samples, int level_samples);

/// Maps a trajectory at any level to the Nc * Ns * q ADC sample locations.
class ForwardModel {
 public:
  ForwardModel(int image_size, int full_samples, int q, NufftOptions nufft = {},
               DensityOptions density = {});

  int image_size() const { return n_; }
  int full_samples() const { return full_samples_; }
  int interp_factor() const { return q_; }
  const NufftOptions& nufft_options() const { return nufft_; }
  const DensityOptions& density_options() const { return density_; }

  /// Composite per-shot map: resample Ns_d -> Ns, then ADC interpolation Ns -> Ns q.
  ShotResampler expansion(int level_samples) const;
  std::vector<Point2> sample_points(const Trajectory& traj) const;
  /// Control-point gradient for per-sample gradients (transpose of sample_points).
  std::vector<Point2> pull_back(std::span<const Point2> point_grads, int n_shots,
                                int level_samples) const;
  std::vector<double> density(std::span<const Point2> points) const;

 private:
  int n_;
  int full_samples_;
  int q_;
  NufftOptions nufft_;
  DensityOptions density_;
};

struct PipelineResult {
  double loss = 0.0;                // mean over the batch
  std::vector<Point2> traj_grad;    // control points of the level trajectory
  std::vector<double> theta_grad;
};

/// Mean loss over `batch` and its gradients through y = F x, x_dc = F^H (w y),
/// x_hat = R_theta(x_dc). Both NUFFT paths contribute to the trajectory gradient; the
/// density weights are held fixed. Batch items are evaluated in parallel and summed in
/// index order.
PipelineResult pipeline_gradient(const ForwardModel& model, const Trajectory& traj,
                                 std::span<const ComplexImage> batch,
                                 std::span<const double> weights, const DenoiserParams* theta,
                                 LossWeights loss, bool want_traj, bool want_theta);

/// Mean loss only.
double pipeline_loss(const ForwardModel& model, const Trajectory& traj,
                     std::span<const ComplexImage> batch, std::span<const double> weights,
                     const DenoiserParams* theta, LossWeights loss);

struct TrajectoryStep {
  Trajectory traj;
  double loss;
  FeasibilityReport feasibility;
};

/// One projected ADAM step on the trajectory: gradient, update, projection.
TrajectoryStep trajectory_step(const ForwardModel& model, const Trajectory& traj,
                               std::span<const ComplexImage> batch,
                               std::span<const double> weights, const DenoiserParams* theta,
                               LossWeights loss, ConstraintBounds bounds, OptimState& state);

struct TrainConfig {
  ImagingGeometry geometry{64, 0.23};
  HardwareLimits limits;
  TrainSchedule schedule = TrainSchedule::desk();
  LossWeights loss;
  int n_shots = 8;
  int n_samples = 64;
  double init_span = 0.9;
  NufftOptions nufft;
  DensityOptions density;

  void validate() const;
};

struct StepRecord {
  int step = 0;
  int level = 1;
  Phase phase = Phase::trajectory;
  double loss = 0.0;
  FeasibilityReport level_feasibility;  // level trajectory against the level bounds
  FeasibilityReport full_feasibility;   // expansion to Ns points against the hardware bounds
  bool projection_converged = true;
  double wall_time = 0.0;
};

struct TrainResult {
  Trajectory traj;
  std::optional<DenoiserParams> theta;
  double initial_val_loss = 0.0;
  double final_val_loss = 0.0;
  double best_val_loss = 0.0;
  int best_step = 0;
  int steps_run = 0;
  bool stopped_early = false;
};

struct TrainHooks {
  /// JSON-lines log sink (one record per step plus level and validation events).
  std::ostream* log = nullptr;
  /// Called after every step with the updated level trajectory.
  std::function<void(const StepRecord&, const Trajectory&)> on_step;
};

/// Runs a full schedule on `dataset` (split 90/10 into training and validation).
/// Returns the best-validation snapshot seen at full resolution.
TrainResult run_scheme(const TrainConfig& config, std::span<const ComplexImage> dataset,
                       ReconKind recon, const TrainHooks& hooks = {});

}  // namespace ktraj
