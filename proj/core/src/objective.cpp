#include "ktraj/objective.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace ktraj {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr std::array<double, 5> kScaleWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

struct RealImage {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  RealImage() = default;
  RealImage(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
};

const std::array<double, kWindow>& gaussian_window() {
  static const auto window = [] {
    std::array<double, kWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kWindow / 2;
      g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
  }();
  return window;
}

// Separable Gaussian filtering, valid region only.
RealImage filter_valid(const RealImage& in) {
  const auto& g = gaussian_window();
  const int oh = in.h - kWindow + 1;
  const int ow = in.w - kWindow + 1;
  RealImage tmp(in.h, ow);
  for (int r = 0; r < in.h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) acc += g[t] * in(r, c + t);
      tmp(r, c) = acc;
    }
  }
  RealImage out(oh, ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) acc += g[t] * tmp(r + t, c);
      out(r, c) = acc;
    }
  }
  return out;
}

// Transpose of filter_valid.
RealImage filter_valid_transpose(const RealImage& grad, int h, int w) {
  const auto& g = gaussian_window();
  RealImage tmp(h, grad.w);
  for (int r = 0; r < grad.h; ++r) {
    for (int c = 0; c < grad.w; ++c) {
      for (int t = 0; t < kWindow; ++t) tmp(r + t, c) += g[t] * grad(r, c);
    }
  }
  RealImage out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < grad.w; ++c) {
      for (int t = 0; t < kWindow; ++t) out(r, c + t) += g[t] * tmp(r, c);
    }
  }
  return out;
}

RealImage pool2(const RealImage& in) {
  RealImage out(in.h / 2, in.w / 2);
  for (int r = 0; r < out.h; ++r) {
    for (int c = 0; c < out.w; ++c) {
      out(r, c) = 0.25 * (in(2 * r, 2 * c) + in(2 * r, 2 * c + 1) + in(2 * r + 1, 2 * c) +
                          in(2 * r + 1, 2 * c + 1));
    }
  }
  return out;
}

void pool2_transpose_add(const RealImage& grad, RealImage& out) {
  for (int r = 0; r < grad.h; ++r) {
    for (int c = 0; c < grad.w; ++c) {
      const double q = 0.25 * grad(r, c);
      out(2 * r, 2 * c) += q;
      out(2 * r, 2 * c + 1) += q;
      out(2 * r + 1, 2 * c) += q;
      out(2 * r + 1, 2 * c + 1) += q;
    }
  }
}

RealImage magnitude(const ComplexImage& img) {
  RealImage out(img.size(), img.size());
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::abs(img.data()[i]);
  return out;
}

double data_range(const ComplexImage& x) {
  double peak = 0.0;
  for (const auto& v : x.data()) peak = std::max(peak, std::abs(v));
  // An all-zero reference has no range; fall back to unit range.
  return peak > 0.0 ? peak : 1.0;
}

RealImage product(const RealImage& a, const RealImage& b) {
  RealImage out(a.h, a.w);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

// Mean of the contrast-structure map (or luminance * contrast-structure when
// `with_luminance`), optionally with its gradient with respect to y.
double scale_term(const RealImage& x, const RealImage& y, double c1, double c2,
                  bool with_luminance, RealImage* grad_y) {
  const RealImage mx = filter_valid(x);
  const RealImage my = filter_valid(y);
  const RealImage exx = filter_valid(product(x, x));
  const RealImage eyy = filter_valid(product(y, y));
  const RealImage exy = filter_valid(product(x, y));

  const std::size_t count = mx.v.size();
  const double inv_count = 1.0 / static_cast<double>(count);
  RealImage g_my, g_exy, g_eyy;
  if (grad_y != nullptr) {
    g_my = RealImage(mx.h, mx.w);
    g_exy = RealImage(mx.h, mx.w);
    g_eyy = RealImage(mx.h, mx.w);
  }

  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double sxx = exx.v[i] - mx.v[i] * mx.v[i];
    const double syy = eyy.v[i] - my.v[i] * my.v[i];
    const double sxy = exy.v[i] - mx.v[i] * my.v[i];
    const double cs_num = 2.0 * sxy + c2;
    const double cs_den = sxx + syy + c2;
    const double cs = cs_num / cs_den;
    const double l_num = 2.0 * mx.v[i] * my.v[i] + c1;
    const double l_den = mx.v[i] * mx.v[i] + my.v[i] * my.v[i] + c1;
    const double l = with_luminance ? l_num / l_den : 1.0;
    total += l * cs;

    if (grad_y == nullptr) continue;
    const double g_cs = inv_count * l;
    const double g_l = with_luminance ? inv_count * cs : 0.0;
    const double g_sxy = g_cs * 2.0 / cs_den;
    const double g_syy = -g_cs * cs_num / (cs_den * cs_den);
    double gm = -g_sxy * mx.v[i] - g_syy * 2.0 * my.v[i];
    if (with_luminance) {
      gm += g_l * (2.0 * mx.v[i] / l_den - l_num * 2.0 * my.v[i] / (l_den * l_den));
    }
    g_my.v[i] = gm;
    g_exy.v[i] = g_sxy;
    g_eyy.v[i] = g_syy;
  }

  if (grad_y != nullptr) {
    const RealImage a = filter_valid_transpose(g_my, y.h, y.w);
    const RealImage b = filter_valid_transpose(g_exy, y.h, y.w);
    const RealImage c = filter_valid_transpose(g_eyy, y.h, y.w);
    *grad_y = RealImage(y.h, y.w);
    for (std::size_t i = 0; i < grad_y->v.size(); ++i) {
      grad_y->v[i] = a.v[i] + x.v[i] * b.v[i] + 2.0 * y.v[i] * c.v[i];
    }
  }
  return total / static_cast<double>(count);
}

void check_pair(const ComplexImage& x, const ComplexImage& xhat) {
  if (x.size() != xhat.size() || x.size() == 0) throw ConfigError("image shape mismatch");
}

// Evaluates MS-SSIM on magnitudes; when `grad` is non-null also fills d S / d |xhat|.
double ms_ssim_impl(const ComplexImage& x, const ComplexImage& xhat, RealImage* grad) {
  check_pair(x, xhat);
  const int scales = ms_ssim_scales(x.size());
  const double range = data_range(x);
  const double c1 = (kK1 * range) * (kK1 * range);
  const double c2 = (kK2 * range) * (kK2 * range);

  double weight_sum = 0.0;
  for (int j = 0; j < scales; ++j) weight_sum += kScaleWeights[j];

  std::vector<RealImage> xs{magnitude(x)};
  std::vector<RealImage> ys{magnitude(xhat)};
  std::vector<double> values(scales);
  std::vector<RealImage> grads(grad != nullptr ? scales : 0);
  for (int j = 0; j < scales; ++j) {
    if (j > 0) {
      xs.push_back(pool2(xs.back()));
      ys.push_back(pool2(ys.back()));
    }
    values[j] = scale_term(xs[j], ys[j], c1, c2, j == scales - 1,
                           grad != nullptr ? &grads[j] : nullptr);
  }

  double score = 1.0;
  bool clamped = false;
  for (int j = 0; j < scales; ++j) {
    if (values[j] <= 0.0) {
      clamped = true;
      score = 0.0;
      break;
    }
    score *= std::pow(values[j], kScaleWeights[j] / weight_sum);
  }

  if (grad != nullptr) {
    *grad = RealImage(x.size(), x.size());
    if (clamped) return score;
    // Accumulate from the coarsest scale back to full resolution.
    RealImage acc = RealImage(ys.back().h, ys.back().w);
    for (int j = scales - 1; j >= 0; --j) {
      const double d_value = score * (kScaleWeights[j] / weight_sum) / values[j];
      RealImage level(ys[j].h, ys[j].w);
      if (j < scales - 1) pool2_transpose_add(acc, level);
      for (std::size_t i = 0; i < level.v.size(); ++i) level.v[i] += d_value * grads[j].v[i];
      acc = std::move(level);
    }
    *grad = std::move(acc);
  }
  return score;
}

// Pulls a gradient with respect to |z| back to a complex cotangent for z.
ComplexImage magnitude_cotangent(const ComplexImage& z, const RealImage& g) {
  ComplexImage out(z.size());
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    const double m = std::abs(z.data()[i]);
    out.data()[i] = m > 0.0 ? g.v[i] * z.data()[i] / m : cplx(0.0);
  }
  return out;
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("loss alpha must lie in [0, 1]");
}

int ms_ssim_scales(int n) {
  // min(5, floor(log2(n / 8))); the coarsest scale then keeps at least 16 pixels.
  int scales = 0;
  while (scales < 5 && (8 << (scales + 1)) <= n) ++scales;
  if (scales == 0) {
    throw ConfigError("image of size " + std::to_string(n) + " is too small for MS-SSIM");
  }
  return scales;
}

double ms_ssim(const ComplexImage& x, const ComplexImage& xhat) {
  return ms_ssim_impl(x, xhat, nullptr);
}

ComplexImage ms_ssim_grad(const ComplexImage& x, const ComplexImage& xhat) {
  RealImage g;
  ms_ssim_impl(x, xhat, &g);
  return magnitude_cotangent(xhat, g);
}

double combined_loss(const ComplexImage& x, const ComplexImage& xhat, LossWeights w) {
  check_pair(x, xhat);
  w.validate();
  const double inv_pixels = 1.0 / static_cast<double>(x.pixel_count());
  const double rest = 1.0 - w.alpha;
  double l1 = 0.0;
  double l2sq = 0.0;
  for (std::size_t i = 0; i < x.pixel_count(); ++i) {
    const double d = std::abs(xhat.data()[i] - x.data()[i]);
    l1 += d;
    l2sq += d * d;
  }
  const double structural = w.alpha > 0.0 ? w.alpha * (1.0 - ms_ssim(x, xhat)) : 0.0;
  return structural + rest * l1 * inv_pixels + 0.5 * rest * rest * std::sqrt(l2sq) * inv_pixels;
}

ComplexImage combined_loss_grad(const ComplexImage& x, const ComplexImage& xhat, LossWeights w) {
  check_pair(x, xhat);
  w.validate();
  const double inv_pixels = 1.0 / static_cast<double>(x.pixel_count());
  const double rest = 1.0 - w.alpha;

  ComplexImage grad(x.size());
  if (w.alpha > 0.0) {
    const ComplexImage ms = ms_ssim_grad(x, xhat);
    for (std::size_t i = 0; i < grad.pixel_count(); ++i) grad.data()[i] = -w.alpha * ms.data()[i];
  }

  double l2sq = 0.0;
  for (std::size_t i = 0; i < x.pixel_count(); ++i) l2sq += std::norm(xhat.data()[i] - x.data()[i]);
  const double l2 = std::sqrt(l2sq);
  const double l2_coeff = l2 > 1e-12 ? 0.5 * rest * rest * inv_pixels / l2 : 0.0;
  for (std::size_t i = 0; i < x.pixel_count(); ++i) {
    const cplx d = xhat.data()[i] - x.data()[i];
    const double m = std::abs(d);
    if (m > 0.0) grad.data()[i] += rest * inv_pixels * d / m;
    grad.data()[i] += l2_coeff * d;
  }
  return grad;
}

double ssim_metric(const ComplexImage& x, const ComplexImage& xhat) {
  check_pair(x, xhat);
  if (x.size() < kWindow) throw ConfigError("image is smaller than the SSIM window");
  const double range = data_range(x);
  const double c1 = (kK1 * range) * (kK1 * range);
  const double c2 = (kK2 * range) * (kK2 * range);
  return scale_term(magnitude(x), magnitude(xhat), c1, c2, true, nullptr);
}

double psnr_metric(const ComplexImage& x, const ComplexImage& xhat) {
  check_pair(x, xhat);
  double peak = 0.0;
  double se = 0.0;
  for (std::size_t i = 0; i < x.pixel_count(); ++i) {
    const double a = std::abs(x.data()[i]);
    const double d = a - std::abs(xhat.data()[i]);
    peak = std::max(peak, a);
    se += d * d;
  }
  if (se == 0.0) return kPsnrCap;
  const double rmse = std::sqrt(se / static_cast<double>(x.pixel_count()));
  return 20.0 * std::log10(peak / rmse);
}

}  // namespace ktraj
