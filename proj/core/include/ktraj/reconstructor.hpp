#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ktraj/geometry.hpp"
#include "ktraj/nufft.hpp"

namespace ktraj {

/// x_dc = F^H (w . y)
ComplexImage dcp_adjoint_recon(const NufftOperator& op, std::span<const cplx> samples,
                               std::span<const double> weights);
ComplexImage dcp_adjoint_recon(std::span<const cplx> samples, std::span<const Point2> points,
                               std::span<const double> weights, int n);

/// Cotangent with respect to the samples, w . F g, for an image cotangent g.
std::vector<cplx> dcp_adjoint_vjp(const NufftOperator& op, std::span<const double> weights,
                                  const ComplexImage& image_cotangent);

/// Shape of one 3x3 same-padded convolution layer.
struct ConvShape {
  int in_channels;
  int out_channels;

  std::size_t weight_count() const { return static_cast<std::size_t>(in_channels) * out_channels * 9; }
  std::size_t param_count() const { return weight_count() + out_channels; }
};

/// Residual denoiser on (real, imag) channels:
///   out = x + conv3(relu(conv2(relu(conv1(x)))))
/// with channel widths 2 -> 16 -> 16 -> 2. Parameters are stored flat, layer by layer,
/// weights [out][in][ky][kx] followed by biases.
struct DenoiserParams {
  static constexpr std::array<ConvShape, 3> kLayers{{{2, 16}, {16, 16}, {16, 2}}};
  static std::size_t size();
  /// Offset of layer l's weights in the flat vector (biases follow the weights).
  static std::size_t offset(int layer);

  /// Kaiming-normal hidden layers, zero biases, zero final layer (identity at init).
  static DenoiserParams init(std::uint64_t seed);

  std::vector<double> theta;
  std::uint64_t seed = 0;
};

ComplexImage denoiser_forward(const DenoiserParams& params, const ComplexImage& image);

struct DenoiserGradient {
  std::vector<double> params;
  ComplexImage input;
};

/// Reverse-mode pass of denoiser_forward for an output cotangent
/// (dL = Re sum conj(g) d out).
DenoiserGradient denoiser_backward(const DenoiserParams& params, const ComplexImage& image,
                                   const ComplexImage& cotangent);

/// Little-endian float64 payload at `path` plus a JSON sidecar at `path` + ".json"
/// recording the layer shapes and the seed.
void save_params(const DenoiserParams& params, const std::filesystem::path& path);
DenoiserParams load_params(const std::filesystem::path& path);

}  // namespace ktraj
