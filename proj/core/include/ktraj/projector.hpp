#pragma once

#include <span>
#include <vector>

#include "ktraj/geometry.hpp"

namespace ktraj {

struct FeasibilityReport {
  double max_box_violation = 0.0;
  double max_speed_violation = 0.0;
  double max_accel_violation = 0.0;
  bool feasible = true;
};

/// Largest violation of each constraint family over all shots; feasible when every
/// violation is at most `tol`.
FeasibilityReport check_feasibility(const Trajectory& traj, ConstraintBounds bounds,
                                    double tol = 1e-8);
FeasibilityReport check_shot_feasibility(std::span<const Point2> shot, ConstraintBounds bounds,
                                         double tol = 1e-8);

struct ProjectionOptions {
  int max_iters = 20000;
  double rel_tol = 1e-9;
  /// Constraint residual the primal iterate must reach before the iteration may stop.
  double feasibility_tol = 1e-10;
  /// Complementarity gap required at termination, relative to Ns max(1, |k|^2); rounding
  /// puts its floor near 1e-14 for shots of order-one extent.
  double gap_tol = 1e-13;
};

struct ShotProjection {
  std::vector<Point2> points;
  int iterations = 0;
  bool converged = false;
};

struct ProjectionResult {
  Trajectory trajectory;
  int max_iterations = 0;  // worst shot
  bool converged = true;   // every shot converged
};

/// Euclidean projection of one shot onto
///   { k : |k| <= 1 coordinatewise, |k[n+1]-k[n]| <= speed, |k[n+1]-2k[n]+k[n-1]| <= accel }.
///
/// Solved on the dual with one block per difference constraint (the box stays in the
/// primal as clipping), FISTA momentum with adaptive restart and step 1/L, L = 4 + 16
/// bounding the squared norm of the stacked difference operators. A shot that is already
/// feasible is returned unchanged.
ShotProjection project_shot(std::span<const Point2> shot, ConstraintBounds bounds,
                            ProjectionOptions options = {});

/// Projects every shot independently. Non-convergence is reported, not thrown; the best
/// iterate is returned.
ProjectionResult project(const Trajectory& traj, ConstraintBounds bounds,
                         ProjectionOptions options = {});

}  // namespace ktraj
