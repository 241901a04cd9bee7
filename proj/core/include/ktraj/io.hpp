#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktraj/geometry.hpp"
#include "ktraj/projector.hpp"
#include "ktraj/reconstructor.hpp"
#include "ktraj/trainer.hpp"

namespace ktraj {

/// Refused export of a trajectory that breaks the hardware limits.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, FeasibilityReport report)
      : std::runtime_error(what), report_(report) {}
  const FeasibilityReport& report() const { return report_; }

 private:
  FeasibilityReport report_;
};

/// Binary trajectory container: magic "KTRJ1", u32 version, u32 Nc, Ns, N, then f64 fov,
/// g_max, s_max, raster and dwell time, then Nc*Ns*2 f64 coordinates (shot-major, x then
/// y). Everything little-endian.
struct TrajectoryFile {
  static constexpr std::uint32_t kVersion = 1;

  Trajectory trajectory;
  ImagingGeometry geometry{64, 0.23};
  HardwareLimits limits;
};

void write_trajectory(const std::filesystem::path& path, const TrajectoryFile& file);
TrajectoryFile read_trajectory(const std::filesystem::path& path);

/// Directory of complex images stored as f32 (re, im) pairs, row-major, one file per
/// image, described by dataset.json {N, count, contrast}.
struct ImageDataset {
  int image_size = 0;
  std::string contrast = "phantom";
  std::vector<ComplexImage> images;
};

void write_dataset(const std::filesystem::path& dir, const ImageDataset& dataset);
ImageDataset read_dataset(const std::filesystem::path& dir);

/// Fraction of ADC samples (after q-fold interpolation) with |k| <= radius.
double center_density(const Trajectory& traj, int q, double radius);

struct MetricSummary {
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Linear-interpolated quantiles; throws on an empty sample.
MetricSummary summarize(std::vector<double> values);

struct EvaluationRow {
  int index = 0;
  double ssim = 0.0;
  double psnr = 0.0;
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
  MetricSummary ssim;
  MetricSummary psnr;
};

/// Retrospective simulation y = F x on the trajectory's ADC samples, DCp adjoint
/// reconstruction, optional denoiser, then SSIM and PSNR against the reference.
EvaluationReport evaluate(const Trajectory& traj, int q, const std::vector<ComplexImage>& images,
                          const DenoiserParams* theta = nullptr, NufftOptions nufft = {},
                          DensityOptions density = {});

/// Writes report.csv (index, ssim, psnr) and summary.json into `dir`.
void write_report(const std::filesystem::path& dir, const EvaluationReport& report);

struct WaveformSample {
  int shot = 0;
  int sample = 0;
  double gx = 0.0;  // T/m
  double gy = 0.0;
};

/// G[n] = kmax (k[n+1] - k[n]) / (gamma raster_time). Throws InfeasibleError naming the
/// violations when the trajectory breaks the gradient or slew limits.
std::vector<WaveformSample> gradient_waveforms(const Trajectory& traj, const HardwareLimits& limits,
                                               const ImagingGeometry& geom);
/// Inverse of gradient_waveforms given each shot's first point.
Trajectory integrate_waveforms(const std::vector<WaveformSample>& waveforms,
                               std::span<const Point2> start_points, int n_samples,
                               const HardwareLimits& limits, const ImagingGeometry& geom);
void export_waveforms(const std::filesystem::path& path, const Trajectory& traj,
                      const HardwareLimits& limits, const ImagingGeometry& geom);

/// JSON config with optional sections "geometry", "limits", "schedule", "loss" and
/// "trajectory"; any unknown key is an error.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string train_config_json(const TrainConfig& config);

}  // namespace ktraj
