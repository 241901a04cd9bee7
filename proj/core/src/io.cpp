#include "ktraj/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "ktraj/density.hpp"
#include "ktraj/objective.hpp"
#include "ktraj/parallel.hpp"
#include "ktraj/sampling.hpp"

namespace ktraj {

namespace {

constexpr std::array<char, 5> kMagic{'K', 'T', 'R', 'J', '1'};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return is;
}

std::string image_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "image_%05d.bin", i);
  return buf;
}

}  // namespace

void write_trajectory(const std::filesystem::path& path, const TrajectoryFile& file) {
  const Trajectory& k = file.trajectory;
  k.check_domain();
  file.limits.validate();
  auto os = open_out(path);
  os.write(kMagic.data(), kMagic.size());
  detail::write_le<std::uint32_t>(os, TrajectoryFile::kVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(k.n_shots()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(k.n_samples()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(file.geometry.matrix_size()));
  for (double v : {file.geometry.fov(), file.limits.g_max, file.limits.s_max,
                   file.limits.raster_time, file.limits.dwell_time}) {
    detail::write_le(os, v);
  }
  for (const auto& p : k.points()) {
    detail::write_le(os, p.x);
    detail::write_le(os, p.y);
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

TrajectoryFile read_trajectory(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::array<char, 5> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ConfigError(path.string() + " is not a KTRJ1 trajectory file");
  }
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != TrajectoryFile::kVersion) {
    throw ConfigError("unsupported trajectory file version " + std::to_string(version));
  }
  const auto nc = detail::read_le<std::uint32_t>(is);
  const auto ns = detail::read_le<std::uint32_t>(is);
  const auto n = detail::read_le<std::uint32_t>(is);
  const double fov = detail::read_le<double>(is);
  HardwareLimits limits;
  limits.g_max = detail::read_le<double>(is);
  limits.s_max = detail::read_le<double>(is);
  limits.raster_time = detail::read_le<double>(is);
  limits.dwell_time = detail::read_le<double>(is);
  limits.validate();
  if (nc == 0 || ns < 2 || nc > (1u << 20) || ns > (1u << 20)) {
    throw ConfigError("implausible trajectory shape in " + path.string());
  }
  std::vector<Point2> pts(static_cast<std::size_t>(nc) * ns);
  for (auto& p : pts) {
    p.x = detail::read_le<double>(is);
    p.y = detail::read_le<double>(is);
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw ConfigError("trailing bytes after trajectory payload in " + path.string());
  }
  TrajectoryFile out{Trajectory(static_cast<int>(nc), static_cast<int>(ns), std::move(pts)),
                     ImagingGeometry(static_cast<int>(n), fov), limits};
  out.trajectory.check_domain();
  return out;
}

void write_dataset(const std::filesystem::path& dir, const ImageDataset& ds) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto& img = ds.images[i];
    if (img.size() != ds.image_size) throw ConfigError("dataset images must share one size");
    auto os = open_out(dir / image_name(static_cast<int>(i)));
    for (const auto& v : img.data()) {
      detail::write_le(os, static_cast<float>(v.real()));
      detail::write_le(os, static_cast<float>(v.imag()));
    }
    if (!os) throw std::runtime_error("failed writing image " + std::to_string(i));
  }
  nlohmann::json meta{{"N", ds.image_size},
                      {"count", ds.images.size()},
                      {"contrast", ds.contrast},
                      {"dtype", "complex64-le"},
                      {"layout", "row-major"}};
  std::ofstream js(dir / "dataset.json");
  js << meta.dump(2) << '\n';
  if (!js) throw std::runtime_error("failed writing dataset.json");
}

ImageDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream js(dir / "dataset.json");
  if (!js) throw std::runtime_error("missing " + (dir / "dataset.json").string());
  const auto meta = nlohmann::json::parse(js);
  ImageDataset ds;
  ds.image_size = meta.at("N").get<int>();
  ds.contrast = meta.value("contrast", "unknown");
  const int count = meta.at("count").get<int>();
  if (ds.image_size <= 0 || count < 0) throw ConfigError("invalid dataset.json");
  const auto pixels = static_cast<std::uintmax_t>(ds.image_size) * ds.image_size;
  for (int i = 0; i < count; ++i) {
    const auto file = dir / image_name(i);
    if (!std::filesystem::exists(file) || std::filesystem::file_size(file) != pixels * 8) {
      throw ConfigError(file.string() + " is missing or not " + std::to_string(ds.image_size) +
                        "x" + std::to_string(ds.image_size) + " complex64");
    }
    auto is = open_in(file);
    ComplexImage img(ds.image_size);
    for (auto& v : img.data()) {
      const float re = detail::read_le<float>(is);
      const float im = detail::read_le<float>(is);
      v = {re, im};
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

double center_density(const Trajectory& traj, int q, double radius) {
  const auto pts = adc_interpolate(traj, q);
  const auto inside = std::count_if(pts.begin(), pts.end(),
                                    [&](const Point2& p) { return norm(p) <= radius; });
  return static_cast<double>(inside) / static_cast<double>(pts.size());
}

MetricSummary summarize(std::vector<double> v) {
  if (v.empty()) throw ConfigError("cannot summarize an empty sample");
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  MetricSummary s;
  double total = 0.0;
  for (double x : v) total += x;
  s.mean = total / static_cast<double>(v.size());
  s.median = quantile(0.5);
  s.q1 = quantile(0.25);
  s.q3 = quantile(0.75);
  s.min = v.front();
  s.max = v.back();
  return s;
}

EvaluationReport evaluate(const Trajectory& traj, int q, const std::vector<ComplexImage>& images,
                          const DenoiserParams* theta, NufftOptions nufft, DensityOptions density) {
  if (images.empty()) throw ConfigError("evaluation dataset is empty");
  const int n = images.front().size();
  for (const auto& img : images) {
    if (img.size() != n) throw ConfigError("evaluation images must share one size");
  }
  const ForwardModel model(n, traj.n_samples(), q, nufft, density);
  const auto pts = model.sample_points(traj);
  const NufftOperator op(n, pts, nufft);
  const auto weights = pipe_weights(op, density);

  EvaluationReport report;
  report.rows.resize(images.size());
  parallel_for(static_cast<int>(images.size()), [&](int i) {
    const auto y = op.forward(images[i]);
    ComplexImage x_hat = dcp_adjoint_recon(op, y, weights);
    if (theta != nullptr) x_hat = denoiser_forward(*theta, x_hat);
    report.rows[i] = {i, ssim_metric(images[i], x_hat), psnr_metric(images[i], x_hat)};
  });
  std::vector<double> ssim;
  std::vector<double> psnr;
  for (const auto& r : report.rows) {
    ssim.push_back(r.ssim);
    psnr.push_back(r.psnr);
  }
  report.ssim = summarize(ssim);
  report.psnr = summarize(psnr);
  return report;
}

void write_report(const std::filesystem::path& dir, const EvaluationReport& report) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "report.csv");
  csv << "index,ssim,psnr\n" << std::setprecision(17);
  for (const auto& r : report.rows) csv << r.index << ',' << r.ssim << ',' << r.psnr << '\n';
  auto summary = [](const MetricSummary& s) {
    return nlohmann::json{{"mean", s.mean}, {"median", s.median}, {"q1", s.q1},
                          {"q3", s.q3},     {"min", s.min},       {"max", s.max}};
  };
  nlohmann::json js{{"count", report.rows.size()},
                    {"ssim", summary(report.ssim)},
                    {"psnr", summary(report.psnr)}};
  std::ofstream out(dir / "summary.json");
  out << js.dump(2) << '\n';
  if (!csv || !out) throw std::runtime_error("failed writing evaluation report to " + dir.string());
}

std::vector<WaveformSample> gradient_waveforms(const Trajectory& traj, const HardwareLimits& limits,
                                               const ImagingGeometry& geom) {
  const auto report = check_feasibility(traj, constraint_bounds(limits, geom));
  if (!report.feasible) {
    std::ostringstream os;
    os << "trajectory violates the hardware limits: box " << report.max_box_violation
       << ", gradient " << report.max_speed_violation << ", slew " << report.max_accel_violation
       << " (normalized units)";
    throw InfeasibleError(os.str(), report);
  }
  const double scale = geom.kmax() / (limits.gamma * limits.raster_time);
  std::vector<WaveformSample> out;
  out.reserve(static_cast<std::size_t>(traj.n_shots()) * (traj.n_samples() - 1));
  for (int c = 0; c < traj.n_shots(); ++c) {
    for (int s = 0; s + 1 < traj.n_samples(); ++s) {
      const Point2 d = traj.at(c, s + 1) - traj.at(c, s);
      out.push_back({c, s, scale * d.x, scale * d.y});
    }
  }
  return out;
}

Trajectory integrate_waveforms(const std::vector<WaveformSample>& waveforms,
                               std::span<const Point2> start_points, int n_samples,
                               const HardwareLimits& limits, const ImagingGeometry& geom) {
  const int nc = static_cast<int>(start_points.size());
  if (waveforms.size() != static_cast<std::size_t>(nc) * (n_samples - 1)) {
    throw ConfigError("waveform count does not match the shot shape");
  }
  const double scale = limits.gamma * limits.raster_time / geom.kmax();
  Trajectory k(nc, n_samples);
  for (int c = 0; c < nc; ++c) k.at(c, 0) = start_points[c];
  for (const auto& w : waveforms) {
    k.at(w.shot, w.sample + 1) = k.at(w.shot, w.sample) + Point2{scale * w.gx, scale * w.gy};
  }
  return k;
}

void export_waveforms(const std::filesystem::path& path, const Trajectory& traj,
                      const HardwareLimits& limits, const ImagingGeometry& geom) {
  const auto wf = gradient_waveforms(traj, limits, geom);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "shot,sample,Gx,Gy\n" << std::setprecision(17);
  for (const auto& w : wf) os << w.shot << ',' << w.sample << ',' << w.gx << ',' << w.gy << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
void read_field(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, "", {"geometry", "limits", "schedule", "loss", "trajectory"});
  TrainConfig c;

  if (root.contains("geometry")) {
    const auto& g = root["geometry"];
    reject_unknown(g, "geometry", {"matrix_size", "fov"});
    int n = c.geometry.matrix_size();
    double fov = c.geometry.fov();
    read_field(g, "matrix_size", n);
    read_field(g, "fov", fov);
    c.geometry = ImagingGeometry(n, fov);
  }
  if (root.contains("limits")) {
    const auto& l = root["limits"];
    reject_unknown(l, "limits", {"g_max", "s_max", "raster_time", "dwell_time", "gamma"});
    read_field(l, "g_max", c.limits.g_max);
    read_field(l, "s_max", c.limits.s_max);
    read_field(l, "raster_time", c.limits.raster_time);
    read_field(l, "dwell_time", c.limits.dwell_time);
    read_field(l, "gamma", c.limits.gamma);
  }
  if (root.contains("schedule")) {
    const auto& s = root["schedule"];
    reject_unknown(s, "schedule",
                   {"preset", "levels", "steps_per_level", "scheme", "coarse_block", "ad_recon_steps",
                    "patience", "batch_size", "dc_refresh", "validation_every",
                    "validation_fraction", "traj_lr", "recon_lr", "seed", "record_wall_time"});
    if (s.contains("preset")) {
      const auto preset = s["preset"].get<std::string>();
      if (preset == "full") {
        c.schedule = TrainSchedule::full_scale();
      } else if (preset != "desk") {
        throw ConfigError("unknown schedule preset '" + preset + "'");
      }
    }
    auto& t = c.schedule;
    read_field(s, "levels", t.levels);
    read_field(s, "steps_per_level", t.steps_per_level);
    if (s.contains("scheme")) t.scheme = parse_scheme(s["scheme"].get<std::string>());
    read_field(s, "coarse_block", t.coarse_block);
    read_field(s, "ad_recon_steps", t.ad_recon_steps);
    read_field(s, "patience", t.patience);
    read_field(s, "batch_size", t.batch_size);
    read_field(s, "dc_refresh", t.dc_refresh);
    read_field(s, "validation_every", t.validation_every);
    read_field(s, "validation_fraction", t.validation_fraction);
    read_field(s, "traj_lr", t.traj_lr);
    read_field(s, "recon_lr", t.recon_lr);
    read_field(s, "seed", t.seed);
    read_field(s, "record_wall_time", t.record_wall_time);
  }
  if (root.contains("loss")) {
    const auto& l = root["loss"];
    reject_unknown(l, "loss", {"alpha"});
    read_field(l, "alpha", c.loss.alpha);
  }
  if (root.contains("trajectory")) {
    const auto& t = root["trajectory"];
    reject_unknown(t, "trajectory", {"n_shots", "n_samples", "init_span"});
    read_field(t, "n_shots", c.n_shots);
    read_field(t, "n_samples", c.n_samples);
    read_field(t, "init_span", c.init_span);
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_train_config(ss.str());
}

std::string train_config_json(const TrainConfig& c) {
  const auto& s = c.schedule;
  json j{
      {"geometry", {{"matrix_size", c.geometry.matrix_size()}, {"fov", c.geometry.fov()}}},
      {"limits",
       {{"g_max", c.limits.g_max},
        {"s_max", c.limits.s_max},
        {"raster_time", c.limits.raster_time},
        {"dwell_time", c.limits.dwell_time},
        {"gamma", c.limits.gamma}}},
      {"schedule",
       {{"levels", s.levels},
        {"steps_per_level", s.steps_per_level},
        {"scheme", to_string(s.scheme)},
        {"coarse_block", s.coarse_block},
        {"ad_recon_steps", s.ad_recon_steps},
        {"patience", s.patience},
        {"batch_size", s.batch_size},
        {"dc_refresh", s.dc_refresh},
        {"validation_every", s.validation_every},
        {"validation_fraction", s.validation_fraction},
        {"traj_lr", s.traj_lr},
        {"recon_lr", s.recon_lr},
        {"seed", s.seed},
        {"record_wall_time", s.record_wall_time}}},
      {"loss", {{"alpha", c.loss.alpha}}},
      {"trajectory",
       {{"n_shots", c.n_shots}, {"n_samples", c.n_samples}, {"init_span", c.init_span}}}};
  return j.dump(2);
}

}  // namespace ktraj
