#include "ktraj/reconstructor.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "binary_io.hpp"

namespace ktraj {

ComplexImage dcp_adjoint_recon(const NufftOperator& op, std::span<const cplx> samples,
                               std::span<const double> weights) {
  if (samples.size() != op.point_count() || weights.size() != op.point_count()) {
    throw ConfigError("samples, weights and points must have the same length");
  }
  std::vector<cplx> weighted(samples.size());
  for (std::size_t m = 0; m < samples.size(); ++m) weighted[m] = weights[m] * samples[m];
  return op.adjoint(weighted);
}

ComplexImage dcp_adjoint_recon(std::span<const cplx> samples, std::span<const Point2> points,
                               std::span<const double> weights, int n) {
  return dcp_adjoint_recon(NufftOperator(n, points), samples, weights);
}

std::vector<cplx> dcp_adjoint_vjp(const NufftOperator& op, std::span<const double> weights,
                                  const ComplexImage& image_cotangent) {
  if (weights.size() != op.point_count()) throw ConfigError("weights do not match the points");
  auto out = op.forward(image_cotangent);
  for (std::size_t m = 0; m < out.size(); ++m) out[m] *= weights[m];
  return out;
}

namespace {

// Channel-major activations: channel c, row r, column col at (c * n + r) * n + col.
using Activations = std::vector<double>;

struct LayerView {
  ConvShape shape;
  const double* w;
  const double* b;
};

LayerView layer(const DenoiserParams& p, int l) {
  const auto shape = DenoiserParams::kLayers[l];
  const double* base = p.theta.data() + DenoiserParams::offset(l);
  return {shape, base, base + shape.weight_count()};
}

// 3x3 cross-correlation with zero padding.
Activations conv_forward(const LayerView& L, const Activations& in, int n) {
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  Activations out(plane * L.shape.out_channels);
  for (int o = 0; o < L.shape.out_channels; ++o) {
    double* dst = &out[o * plane];
    std::fill(dst, dst + plane, L.b[o]);
    for (int i = 0; i < L.shape.in_channels; ++i) {
      const double* src = &in[i * plane];
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wt = L.w[((o * L.shape.in_channels + i) * 3 + ky) * 3 + kx];
          const int c0 = std::max(0, 1 - kx);
          const int c1 = std::min(n, n + 1 - kx);
          for (int r = std::max(0, 1 - ky); r < std::min(n, n + 1 - ky); ++r) {
            const double* s = src + static_cast<std::size_t>(r + ky - 1) * n + (kx - 1);
            double* d = dst + static_cast<std::size_t>(r) * n;
            for (int c = c0; c < c1; ++c) d[c] += wt * s[c];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates weight/bias gradients into `grad` and returns the input gradient.
Activations conv_backward(const LayerView& L, const Activations& in, const Activations& gout,
                          int n, double* grad_w, double* grad_b) {
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  Activations gin(plane * L.shape.in_channels, 0.0);
  for (int o = 0; o < L.shape.out_channels; ++o) {
    const double* g = &gout[o * plane];
    double bias = 0.0;
    for (std::size_t p = 0; p < plane; ++p) bias += g[p];
    grad_b[o] += bias;
    for (int i = 0; i < L.shape.in_channels; ++i) {
      const double* src = &in[i * plane];
      double* gi = &gin[i * plane];
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const std::size_t widx = ((o * L.shape.in_channels + i) * 3 + ky) * 3 + kx;
          const double wt = L.w[widx];
          const int c0 = std::max(0, 1 - kx);
          const int c1 = std::min(n, n + 1 - kx);
          double acc = 0.0;
          for (int r = std::max(0, 1 - ky); r < std::min(n, n + 1 - ky); ++r) {
            const std::size_t shift = static_cast<std::size_t>(r + ky - 1) * n + (kx - 1);
            const double* s = src + shift;
            double* d = gi + shift;
            const double* gr = g + static_cast<std::size_t>(r) * n;
            for (int c = c0; c < c1; ++c) {
              acc += gr[c] * s[c];
              d[c] += wt * gr[c];
            }
          }
          grad_w[widx] += acc;
        }
      }
    }
  }
  return gin;
}

void relu(Activations& a) {
  for (auto& v : a) v = v > 0.0 ? v : 0.0;
}

Activations to_channels(const ComplexImage& img) {
  const std::size_t plane = img.pixel_count();
  Activations out(2 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    out[p] = img.data()[p].real();
    out[plane + p] = img.data()[p].imag();
  }
  return out;
}

ComplexImage from_channels(const Activations& a, int n) {
  ComplexImage img(n);
  const std::size_t plane = img.pixel_count();
  for (std::size_t p = 0; p < plane; ++p) img.data()[p] = {a[p], a[plane + p]};
  return img;
}

void check_params(const DenoiserParams& p) {
  if (p.theta.size() != DenoiserParams::size()) {
    throw ConfigError("denoiser parameter vector has " + std::to_string(p.theta.size()) +
                      " entries, expected " + std::to_string(DenoiserParams::size()));
  }
}

}  // namespace

std::size_t DenoiserParams::size() { return offset(static_cast<int>(kLayers.size())); }

std::size_t DenoiserParams::offset(int l) {
  std::size_t off = 0;
  for (int i = 0; i < l; ++i) off += kLayers[i].param_count();
  return off;
}

DenoiserParams DenoiserParams::init(std::uint64_t seed) {
  DenoiserParams p;
  p.seed = seed;
  p.theta.assign(size(), 0.0);
  std::mt19937_64 rng(seed);
  for (int l = 0; l + 1 < static_cast<int>(kLayers.size()); ++l) {
    const auto shape = kLayers[l];
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (9.0 * shape.in_channels)));
    double* w = p.theta.data() + offset(l);
    for (std::size_t k = 0; k < shape.weight_count(); ++k) w[k] = dist(rng);
  }
  return p;
}

ComplexImage denoiser_forward(const DenoiserParams& params, const ComplexImage& image) {
  check_params(params);
  const int n = image.size();
  const Activations x = to_channels(image);
  Activations h1 = conv_forward(layer(params, 0), x, n);
  relu(h1);
  Activations h2 = conv_forward(layer(params, 1), h1, n);
  relu(h2);
  Activations out = conv_forward(layer(params, 2), h2, n);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += x[k];
  return from_channels(out, n);
}

DenoiserGradient denoiser_backward(const DenoiserParams& params, const ComplexImage& image,
                                   const ComplexImage& cotangent) {
  check_params(params);
  if (cotangent.size() != image.size()) throw ConfigError("cotangent shape mismatch");
  const int n = image.size();
  const Activations x = to_channels(image);
  Activations h1 = conv_forward(layer(params, 0), x, n);
  relu(h1);
  Activations h2 = conv_forward(layer(params, 1), h1, n);
  relu(h2);

  DenoiserGradient grad{std::vector<double>(params.theta.size(), 0.0), ComplexImage(n)};
  auto slot = [&](int l) {
    double* w = grad.params.data() + DenoiserParams::offset(l);
    return std::pair{w, w + DenoiserParams::kLayers[l].weight_count()};
  };

  const Activations g_out = to_channels(cotangent);
  auto [w2, b2] = slot(2);
  Activations g_h2 = conv_backward(layer(params, 2), h2, g_out, n, w2, b2);
  // ReLU passes the gradient only where the activation was positive (0 at exactly 0).
  for (std::size_t k = 0; k < g_h2.size(); ++k) g_h2[k] = h2[k] > 0.0 ? g_h2[k] : 0.0;
  auto [w1, b1] = slot(1);
  Activations g_h1 = conv_backward(layer(params, 1), h1, g_h2, n, w1, b1);
  for (std::size_t k = 0; k < g_h1.size(); ++k) g_h1[k] = h1[k] > 0.0 ? g_h1[k] : 0.0;
  auto [w0, b0] = slot(0);
  Activations g_x = conv_backward(layer(params, 0), x, g_h1, n, w0, b0);
  for (std::size_t k = 0; k < g_x.size(); ++k) g_x[k] += g_out[k];  // residual skip
  grad.input = from_channels(g_x, n);
  return grad;
}

void save_params(const DenoiserParams& params, const std::filesystem::path& path) {
  check_params(params);
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + path.string());
  for (double v : params.theta) detail::write_le(bin, v);
  if (!bin) throw std::runtime_error("failed writing " + path.string());

  nlohmann::json side;
  side["format"] = "ktraj-denoiser";
  side["dtype"] = "float64-le";
  side["count"] = params.theta.size();
  side["seed"] = params.seed;
  for (const auto& s : DenoiserParams::kLayers) {
    side["layers"].push_back({{"in", s.in_channels}, {"out", s.out_channels}, {"kernel", 3}});
  }
  std::ofstream js(path.string() + ".json");
  js << side.dump(2) << '\n';
  if (!js) throw std::runtime_error("failed writing " + path.string() + ".json");
}

DenoiserParams load_params(const std::filesystem::path& path) {
  std::ifstream js(path.string() + ".json");
  if (!js) throw std::runtime_error("missing parameter sidecar " + path.string() + ".json");
  const auto side = nlohmann::json::parse(js);
  if (side.value("format", "") != "ktraj-denoiser") {
    throw ConfigError("unrecognized parameter sidecar format");
  }
  const auto& layers = side.at("layers");
  if (layers.size() != DenoiserParams::kLayers.size()) throw ConfigError("layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].at("in").get<int>() != DenoiserParams::kLayers[l].in_channels ||
        layers[l].at("out").get<int>() != DenoiserParams::kLayers[l].out_channels ||
        layers[l].at("kernel").get<int>() != 3) {
      throw ConfigError("layer " + std::to_string(l) + " shape mismatch");
    }
  }
  if (side.at("count").get<std::size_t>() != DenoiserParams::size()) {
    throw ConfigError("parameter count mismatch");
  }

  DenoiserParams p;
  p.seed = side.at("seed").get<std::uint64_t>();
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + path.string());
  p.theta.resize(DenoiserParams::size());
  for (auto& v : p.theta) v = detail::read_le<double>(bin);
  if (bin.peek() != std::char_traits<char>::eof()) {
    throw ConfigError("parameter file is longer than its sidecar declares");
  }
  return p;
}

}  // namespace ktraj
