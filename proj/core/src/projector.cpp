#include "ktraj/projector.hpp"

#include <algorithm>
#include <cmath>

#include "ktraj/parallel.hpp"

namespace ktraj {
namespace {

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// (D1 k)_i = k[i+1] - k[i]
void first_diff(std::span<const Point2> k, std::span<Point2> out) {
  for (std::size_t i = 0; i + 1 < k.size(); ++i) out[i] = k[i + 1] - k[i];
}

// (D2 k)_i = k[i+2] - 2 k[i+1] + k[i]
void second_diff(std::span<const Point2> k, std::span<Point2> out) {
  for (std::size_t i = 0; i + 2 < k.size(); ++i) {
    out[i] = k[i + 2] - 2.0 * k[i + 1] + k[i];
  }
}

// k = clip(c - D1^T lambda - D2^T mu)
void primal_from_dual(std::span<const Point2> c, std::span<const Point2> lambda,
                      std::span<const Point2> mu, std::span<Point2> k) {
  const std::size_t n = c.size();
  for (std::size_t j = 0; j < n; ++j) {
    Point2 t;
    if (j >= 1) t += lambda[j - 1];
    if (j + 1 < n) t = t - lambda[j];
    if (!mu.empty()) {
      if (j >= 2) t += mu[j - 2];
      if (j >= 1 && j - 1 < mu.size()) t = t - 2.0 * mu[j - 1];
      if (j < mu.size()) t += mu[j];
    }
    k[j] = {clip_unit(c[j].x - t.x), clip_unit(c[j].y - t.y)};
  }
}

// Proximal map of tau * radius * |.| applied blockwise (group soft threshold).
void shrink(std::span<Point2> v, double threshold) {
  for (auto& p : v) {
    const double len = norm(p);
    p = len > threshold ? (1.0 - threshold / len) * p : Point2{};
  }
}

double max_norm_excess(std::span<const Point2> v, double radius) {
  double worst = 0.0;
  for (const auto& p : v) worst = std::max(worst, norm(p) - radius);
  return worst;
}

}  // namespace

FeasibilityReport check_shot_feasibility(std::span<const Point2> shot, ConstraintBounds bounds,
                                         double tol) {
  FeasibilityReport rep;
  for (const auto& p : shot) {
    rep.max_box_violation =
        std::max({rep.max_box_violation, std::abs(p.x) - 1.0, std::abs(p.y) - 1.0});
  }
  for (std::size_t i = 0; i + 1 < shot.size(); ++i) {
    rep.max_speed_violation =
        std::max(rep.max_speed_violation, norm(shot[i + 1] - shot[i]) - bounds.speed);
  }
  for (std::size_t i = 0; i + 2 < shot.size(); ++i) {
    const Point2 acc = shot[i + 2] - 2.0 * shot[i + 1] + shot[i];
    rep.max_accel_violation = std::max(rep.max_accel_violation, norm(acc) - bounds.accel);
  }
  rep.feasible = rep.max_box_violation <= tol && rep.max_speed_violation <= tol &&
                 rep.max_accel_violation <= tol;
  return rep;
}

FeasibilityReport check_feasibility(const Trajectory& traj, ConstraintBounds bounds, double tol) {
  FeasibilityReport rep;
  for (int s = 0; s < traj.n_shots(); ++s) {
    const auto shot = check_shot_feasibility(traj.shot(s), bounds, tol);
    rep.max_box_violation = std::max(rep.max_box_violation, shot.max_box_violation);
    rep.max_speed_violation = std::max(rep.max_speed_violation, shot.max_speed_violation);
    rep.max_accel_violation = std::max(rep.max_accel_violation, shot.max_accel_violation);
  }
  rep.feasible = rep.max_box_violation <= tol && rep.max_speed_violation <= tol &&
                 rep.max_accel_violation <= tol;
  return rep;
}

ShotProjection project_shot(std::span<const Point2> shot, ConstraintBounds bounds,
                            ProjectionOptions options) {
  if (!(bounds.speed > 0.0) || !(bounds.accel > 0.0)) {
    throw ConfigError("projection bounds must be positive");
  }
  ShotProjection result;
  result.points.assign(shot.begin(), shot.end());
  if (check_shot_feasibility(shot, bounds, 0.0).feasible) {
    result.converged = true;
    return result;
  }

  const std::size_t n = shot.size();
  const std::size_t n1 = n >= 2 ? n - 1 : 0;
  const std::size_t n2 = n >= 3 ? n - 2 : 0;
  constexpr double kLipschitz = 4.0 + 16.0;
  const double tau = 1.0 / kLipschitz;

  // Dual iterates (lambda for speed, mu for acceleration), previous iterates and the
  // extrapolated point.
  std::vector<Point2> lam(n1), mu(n2), lam_prev(n1), mu_prev(n2), lam_y(n1), mu_y(n2);
  std::vector<Point2> k(n), k_prev(n), d1(n1), d2(n2);
  double momentum = 1.0;

  primal_from_dual(shot, lam, mu, k);
  for (int it = 1; it <= options.max_iters; ++it) {
    lam_prev = lam;
    mu_prev = mu;
    k_prev = k;

    // Gradient of the smooth dual part at the extrapolated point is D k(y).
    primal_from_dual(shot, lam_y, mu_y, k);
    first_diff(k, d1);
    second_diff(k, d2);
    for (std::size_t i = 0; i < n1; ++i) lam[i] = lam_y[i] + tau * d1[i];
    for (std::size_t i = 0; i < n2; ++i) mu[i] = mu_y[i] + tau * d2[i];
    shrink(lam, tau * bounds.speed);
    shrink(mu, tau * bounds.accel);

    // Gradient-based adaptive restart.
    double restart_test = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
      const Point2 a = lam_y[i] - lam[i];
      const Point2 b = lam[i] - lam_prev[i];
      restart_test += a.x * b.x + a.y * b.y;
    }
    for (std::size_t i = 0; i < n2; ++i) {
      const Point2 a = mu_y[i] - mu[i];
      const Point2 b = mu[i] - mu_prev[i];
      restart_test += a.x * b.x + a.y * b.y;
    }
    double beta = 0.0;
    if (restart_test > 0.0) {
      momentum = 1.0;
    } else {
      const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      beta = (momentum - 1.0) / next;
      momentum = next;
    }
    for (std::size_t i = 0; i < n1; ++i) lam_y[i] = lam[i] + beta * (lam[i] - lam_prev[i]);
    for (std::size_t i = 0; i < n2; ++i) mu_y[i] = mu[i] + beta * (mu[i] - mu_prev[i]);

    primal_from_dual(shot, lam, mu, k);
    result.iterations = it;

    double change = 0.0;
    double scale = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      change = std::max(change, norm(k[j] - k_prev[j]));
      scale = std::max(scale, norm(k[j]));
    }
    if (change > options.rel_tol * scale) continue;
    first_diff(k, d1);
    second_diff(k, d2);
    const double residual =
        std::max(max_norm_excess(d1, bounds.speed), max_norm_excess(d2, bounds.accel));
    if (residual > options.feasibility_tol) continue;
    // Complementarity gap sum(r |l_i| - <l_i, (Dk)_i>); with the primal objective
    // 1-strongly convex it bounds the squared distance to the projection.
    double gap = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
      gap += bounds.speed * norm(lam[i]) - (lam[i].x * d1[i].x + lam[i].y * d1[i].y);
    }
    for (std::size_t i = 0; i < n2; ++i) {
      gap += bounds.accel * norm(mu[i]) - (mu[i].x * d2[i].x + mu[i].y * d2[i].y);
    }
    if (gap <= options.gap_tol * static_cast<double>(n) * scale * scale) {
      result.converged = true;
      break;
    }
  }
  result.points = k;
  return result;
}

ProjectionResult project(const Trajectory& traj, ConstraintBounds bounds,
                         ProjectionOptions options) {
  std::vector<ShotProjection> shots(static_cast<std::size_t>(traj.n_shots()));
  parallel_for(traj.n_shots(), [&](int s) { shots[s] = project_shot(traj.shot(s), bounds, options); });

  std::vector<Point2> points;
  points.reserve(traj.size());
  ProjectionResult out{Trajectory(traj.n_shots(), traj.n_samples()), 0, true};
  for (const auto& s : shots) {
    points.insert(points.end(), s.points.begin(), s.points.end());
    out.max_iterations = std::max(out.max_iterations, s.iterations);
    out.converged = out.converged && s.converged;
  }
  out.trajectory = Trajectory(traj.n_shots(), traj.n_samples(), std::move(points));
  return out;
}

}  // namespace ktraj
