#include "ktraj/density.hpp"

#include <algorithm>
#include <cmath>

namespace ktraj {

std::vector<double> pipe_weights(const NufftOperator& op, DensityOptions options) {
  if (op.point_count() == 0) throw ConfigError("density compensation needs at least one point");
  if (options.iterations < 1) throw ConfigError("density compensation needs iterations >= 1");

  const KernelGrid kernel(op.image_size(), op.points(), options.oversampling,
                          options.kernel_width);
  const auto g = static_cast<std::size_t>(kernel.grid_size());
  std::vector<double> w(op.point_count(), 1.0);
  std::vector<cplx> wc(w.size()), response(w.size()), grid(g * g);
  for (int it = 0; it < options.iterations; ++it) {
    std::transform(w.begin(), w.end(), wc.begin(), [](double v) { return cplx(v, 0.0); });
    std::fill(grid.begin(), grid.end(), cplx(0.0));
    kernel.spread(wc, grid);
    kernel.interpolate(grid, response);
    for (std::size_t m = 0; m < w.size(); ++m) {
      w[m] /= std::max(std::abs(response[m]), options.floor);
    }
  }

  // The kernel fixes the shape of the weights; the scale comes from the exact operator,
  // as the least-squares solution of |F F^H (s w)| = 1.
  std::transform(w.begin(), w.end(), wc.begin(), [](double v) { return cplx(v, 0.0); });
  const auto exact = op.forward(op.adjoint(wc));
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : exact) {
    const double a = std::abs(r);
    num += a;
    den += a * a;
  }
  const double scale = den > 0.0 ? num / den : 1.0;
  for (auto& v : w) v *= scale;
  return w;
}

std::vector<double> pipe_weights(std::span<const Point2> points, int n, DensityOptions options,
                                 NufftOptions nufft) {
  if (points.empty()) throw ConfigError("density compensation needs at least one point");
  return pipe_weights(NufftOperator(n, points, nufft), options);
}

}  // namespace ktraj
