#pragma once

#include <vector>

#include "ktraj/geometry.hpp"

namespace ktraj {

struct LossWeights {
  double alpha = 0.998;

  void validate() const;
};

/// PSNR reported for identical images.
inline constexpr double kPsnrCap = 99.0;

/// Multi-scale SSIM of the magnitude images, reference first.
///
/// Gaussian window 11x11 (sigma 1.5), valid filtering, 2x2 average-pool downsampling,
/// min(5, floor(log2(N/8))) scales with the standard exponents renormalized to the
/// scales used. Stabilizers use the data range L = max |x|. Per-scale means that come out
/// non-positive are clamped to zero.
double ms_ssim(const ComplexImage& x, const ComplexImage& xhat);

/// Gradient of ms_ssim with respect to xhat as a complex cotangent (dS = Re <g, dxhat>).
ComplexImage ms_ssim_grad(const ComplexImage& x, const ComplexImage& xhat);

/// alpha (1 - MS-SSIM) + (1 - alpha) |x - xhat|_1 / N^2 + ((1 - alpha)^2 / 2) |x - xhat|_2 / N^2
///
/// The l1/l2 norms act on complex differences, MS-SSIM on magnitudes.
double combined_loss(const ComplexImage& x, const ComplexImage& xhat, LossWeights w);

/// Cotangent of combined_loss with respect to xhat.
ComplexImage combined_loss_grad(const ComplexImage& x, const ComplexImage& xhat, LossWeights w);

/// Single-scale SSIM on magnitudes with the same window and stabilizers as ms_ssim.
double ssim_metric(const ComplexImage& x, const ComplexImage& xhat);

/// 20 log10(L / RMSE) on magnitudes; kPsnrCap when the magnitudes agree exactly.
double psnr_metric(const ComplexImage& x, const ComplexImage& xhat);

/// Number of MS-SSIM scales used for an N x N image (throws ConfigError when zero).
int ms_ssim_scales(int n);

}  // namespace ktraj
