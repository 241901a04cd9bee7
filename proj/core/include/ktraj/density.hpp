#pragma once

#include <span>
#include <vector>

#include "ktraj/geometry.hpp"
#include "ktraj/nufft.hpp"

namespace ktraj {

struct DensityOptions {
  int iterations = 10;
  double floor = 1e-10;
  double oversampling = 2.0;
  int kernel_width = 6;
};

/// Iterative density compensation weights for an arbitrary point set.
///
/// Starting from w = 1, repeats w <- w / |C w| a fixed number of times, where C is the
/// point-to-point response of the Kaiser-Bessel gridding kernel (spread then interpolate,
/// the compact main lobe of F F^H). The result is then scaled so that |F F^H w| is 1 in
/// the least-squares sense with the exact operator. A single sample at the origin thus
/// gets 1 / N^2, as does a full Cartesian grid.
std::vector<double> pipe_weights(const NufftOperator& op, DensityOptions options = {});
std::vector<double> pipe_weights(std::span<const Point2> points, int n, DensityOptions options = {},
                                 NufftOptions nufft = {});

}  // namespace ktraj
