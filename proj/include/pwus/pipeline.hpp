// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "pwus/config.hpp"
#include "pwus/denoiser.hpp"
#include "pwus/display.hpp"
#include "pwus/io.hpp"
#include "pwus/metrics.hpp"
#include "pwus/operator.hpp"
#include "pwus/patch_denoiser.hpp"
#include "pwus/phantom.hpp"
#include "pwus/sampler.hpp"

namespace pwus {

// ---------------------------------------------------------------------------
// small utilities

inline int effective_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 4;
}

/// Run fn(i) for i in [0, n) on up to `threads` workers. Work items must be
/// independent; results should land in preallocated slots so output order is
/// deterministic.
template <typename Fn>
void parallel_for(long long n, int threads, Fn&& fn) {
  threads = std::min<long long>(std::max(threads, 1), n);
  if (threads <= 1) {
    for (long long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const long long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Shortest round-trip decimal representation; locale-independent, so CSV
/// bytes are reproducible.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<double> make_angles(const AngleSetConfig& a) {
  std::vector<double> thetas(a.count);
  const double span = a.span_deg * std::numbers::pi / 180.0;
  if (a.count == 1) {
    thetas[0] = 0.0;
    return thetas;
  }
  for (int i = 0; i < a.count; ++i)
    thetas[i] = -span + 2.0 * span * i / (a.count - 1);
  return thetas;
}

inline int closest_to_zero_index(const std::vector<double>& thetas) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(thetas.size()); ++i)
    if (std::abs(thetas[i]) < std::abs(thetas[best])) best = i;
  return best;
}

/// 99.9th percentile of |pixels|; the normalization scale of the diffusion
/// domain. Returns 1 for an all-zero image.
inline double amplitude_scale(const Image& img) {
  std::vector<double> mags(img.size());
  for (std::size_t k = 0; k < img.size(); ++k) mags[k] = std::abs(img.pixels[k]);
  const std::size_t idx = static_cast<std::size_t>(
      std::min<double>(std::ceil(0.999 * static_cast<double>(mags.size())),
                       static_cast<double>(mags.size())) - 1.0);
  std::nth_element(mags.begin(), mags.begin() + idx, mags.end());
  const double scale = mags[idx];
  return scale > 0 ? scale : 1.0;
}

inline Image scaled_copy(const Image& img, double factor) {
  Image out = img;
  for (double& v : out.pixels) v *= factor;
  return out;
}

// ---------------------------------------------------------------------------
// metrics rows

struct MetricsRow {
  std::string frame_id;
  std::string method;
  int steps = 0;
  double sigma_k = 0.0;
  double sigma_max = 0.0;
  std::string schedule_mode = "-";
  std::uint64_t seed = 0;
  double cnr_db = 0.0;
  double gcnr = 0.0;
  std::int64_t denoiser_calls = 0;
};

inline const char* kMetricsHeader =
    "frame_id,method,steps,sigma_k,sigma_max,schedule_mode,seed,cnr_db,gcnr,denoiser_calls";

inline std::string to_csv(const MetricsRow& r) {
  std::ostringstream os;
  os << r.frame_id << "," << r.method << "," << r.steps << "," << format_double(r.sigma_k) << ","
     << format_double(r.sigma_max) << "," << r.schedule_mode << "," << r.seed << ","
     << format_double(r.cnr_db) << "," << format_double(r.gcnr) << "," << r.denoiser_calls;
  return os.str();
}

inline void append_rows(const std::string& path, const std::string& header,
                        const std::vector<std::string>& lines) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("cannot open " + path);
  if (fresh) os << header << "\n";
  for (const auto& line : lines) os << line << "\n";
}

/// CNR/gCNR of one reconstruction, evaluated on the log-compressed envelope
/// over the phantom's ROI disks.
struct ImageMetrics {
  double cnr_db = 0.0;
  double gcnr = 0.0;
};

inline ImageMetrics evaluate_image_metrics(const ExperimentConfig& cfg, const Image& img) {
  const Image db = log_compress(envelope(img), cfg.metrics.dynamic_range_db);
  const RoiMasks masks = roi_masks(cfg.phantom, cfg.grid, cfg.metrics.roi_margin);
  const RoiSamples samples = extract_roi_samples(db, masks);
  return {cnr_db(samples), gcnr(samples, cfg.metrics.bins)};
}

// ---------------------------------------------------------------------------
// denoiser dispatch

using AnyDenoiser = std::variant<GaussianPriorDenoiser, GmmPixelDenoiser, LinearPatchDenoiser>;

inline std::string model_path(const ExperimentConfig& cfg) {
  if (!cfg.denoiser.model_path.empty()) return cfg.denoiser.model_path;
  return (std::filesystem::path(cfg.out_dir) / "denoiser.pwdn").string();
}

inline AnyDenoiser make_denoiser(const ExperimentConfig& cfg) {
  const auto& d = cfg.denoiser;
  if (d.kind == "gaussian") return GaussianPriorDenoiser{d.gaussian_mean, d.gaussian_std, std::nullopt};
  if (d.kind == "gmm") return GmmPixelDenoiser{d.gmm_weights, d.gmm_means, d.gmm_stds};
  return LinearPatchDenoiser::load(model_path(cfg));
}

inline MeasurementOperator make_operator(const ExperimentConfig& cfg, double theta) {
  return MeasurementOperator(cfg.geometry, cfg.grid, theta, cfg.apodization);
}

// ---------------------------------------------------------------------------
// acquisition simulation (in memory)

struct SimulatedAcquisition {
  Image truth;
  std::vector<double> thetas;
  std::vector<RfFrame> frames;
  Image das_single;
  Image das_compound;
  int single_index = 0;
};

/// Render one phantom realization and acquire every steering angle: forward
/// model, channel noise, per-angle DAS adjoints and their compound. Operators
/// are built transiently per angle (they are large); only results are kept.
inline SimulatedAcquisition simulate_acquisition(const ExperimentConfig& cfg,
                                                 std::uint64_t realization) {
  cfg.validate();
  SimulatedAcquisition acq;
  PhantomSpec spec = cfg.phantom;
  spec.seed = stage_seed(cfg.seed, SeedStage::Phantom, realization);
  acq.truth = render(spec, cfg.grid);
  acq.thetas = make_angles(cfg.angles);
  acq.single_index = closest_to_zero_index(acq.thetas);

  const int n = static_cast<int>(acq.thetas.size());
  acq.frames.resize(n);
  std::vector<Image> adjoints(n);
  parallel_for(n, effective_threads(cfg.threads), [&](long long i) {
    const MeasurementOperator op = make_operator(cfg, acq.thetas[i]);
    RfFrame y = op.forward(acq.truth);
    y = add_channel_noise(y, cfg.channel_noise_gamma,
                          stage_seed(cfg.seed, SeedStage::ChannelNoise, realization * 4096 + i));
    adjoints[i] = op.adjoint(y);
    acq.frames[i] = std::move(y);
  });
  acq.das_compound = compound(adjoints);
  acq.das_single = std::move(adjoints[acq.single_index]);
  return acq;
}

// ---------------------------------------------------------------------------
// reconstruction core shared by reconstruct and sweep

/// The measurements data consistency runs against: the dc_angles frames
/// closest to broadside (one, the single PW, by default). Owns the operators;
/// keep alive for the duration of the sampler run.
struct DcMeasurementSet {
  std::vector<MeasurementOperator> ops;
  std::vector<const RfFrame*> frames;

  std::vector<MeasurementRef> refs() const {
    std::vector<MeasurementRef> r;
    for (std::size_t i = 0; i < ops.size(); ++i) r.push_back({&ops[i], frames[i]});
    return r;
  }

  double frame_norm() const {
    double acc = 0.0;
    for (const RfFrame* f : frames)
      for (double v : f->samples) acc += v * v;
    return std::sqrt(acc);
  }
};

inline DcMeasurementSet build_dc_measurements(const ExperimentConfig& cfg,
                                              const std::vector<RfFrame>& frames) {
  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(frames[a].steering_angle) < std::abs(frames[b].steering_angle);
  });
  const std::size_t count = std::min<std::size_t>(std::max(cfg.sampler.dc_angles, 1), frames.size());
  DcMeasurementSet set;
  for (std::size_t i = 0; i < count; ++i) {
    set.ops.push_back(make_operator(cfg, frames[order[i]].steering_angle));
    set.frames.push_back(&frames[order[i]]);
  }
  return set;
}

struct ReconstructionResult {
  Image image;
  RunLog log;
  double wall_ms = 0.0;
};

/// Run one diffusion reconstruction conditioned on the measurement set.
/// `das_single` is the unnormalized adjoint image of the single-PW frame.
template <DenoiserLike D>
ReconstructionResult reconstruct_diffusion(const ExperimentConfig& cfg, const D& denoiser,
                                           const DcMeasurementSet& measurements,
                                           const Image& das_single, bool shortcut,
                                           const SamplerSettings& s, std::uint64_t sampler_seed) {
  const double scale = amplitude_scale(das_single);
  const Image x_s = scaled_copy(das_single, 1.0 / scale);

  DataConsistencyConfig dc;
  dc.lambda = s.lambda;
  dc.rule = s.dc_rule;
  dc.cg_iters = s.dc_cg_iters;
  dc.measurement_scale = scale;
  dc.residual_floor = s.residual_floor * std::max(1.0, measurements.frame_norm());
  dc.measurements = measurements.refs();

  ReconstructionResult res;
  const auto start = std::chrono::steady_clock::now();
  if (shortcut) {
    ShortcutConfig sc;
    sc.sigma_k = s.sigma_k;
    sc.steps = s.steps;
    sc.mode = s.mode;
    sc.sigma_max = s.sigma_max;
    sc.sigma_min = s.sigma_min;
    sc.rho = s.rho;
    sc.n_full = s.n_full;
    res.image = sample_shortcut(denoiser, x_s, sc, dc, sampler_seed, &res.log);
  } else {
    const NoiseSchedule sched = karras_schedule(s.n_full, s.sigma_min, s.sigma_max, s.rho);
    res.image = sample_full(denoiser, sched, cfg.grid.axial_count, cfg.grid.lateral_count, dc,
                            sampler_seed, &res.log);
  }
  res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  res.image = scaled_copy(res.image, scale);  // back to acquisition amplitude units
  return res;
}

// ---------------------------------------------------------------------------
// commands

inline std::filesystem::path frames_dir(const ExperimentConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "frames";
}

inline std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d.pwrf", index);
  return buf;
}

/// simulate: render the phantom, acquire all angles, write PWRF frames and the
/// ground-truth PWIMG.
inline void run_simulate(const ExperimentConfig& cfg) {
  const SimulatedAcquisition acq = simulate_acquisition(cfg, 0);
  std::filesystem::create_directories(frames_dir(cfg));
  for (std::size_t i = 0; i < acq.frames.size(); ++i)
    write_pwrf(acq.frames[i], (frames_dir(cfg) / frame_filename(static_cast<int>(i))).string());
  write_pwimg(acq.truth, (std::filesystem::path(cfg.out_dir) / "truth.pwimg").string());
}

inline std::vector<RfFrame> load_frames(const ExperimentConfig& cfg) {
  std::vector<RfFrame> frames;
  for (int i = 0;; ++i) {
    const auto path = frames_dir(cfg) / frame_filename(i);
    if (!std::filesystem::exists(path)) break;
    frames.push_back(read_pwrf(path.string()));
  }
  if (frames.empty())
    throw std::runtime_error("no frames found under " + frames_dir(cfg).string() +
                             " (run simulate first)");
  return frames;
}

inline void export_image(const ExperimentConfig& cfg, const Image& img, const std::string& stem) {
  const auto base = std::filesystem::path(cfg.out_dir) / stem;
  write_pwimg(img, base.string() + ".pwimg");
  write_pgm(log_compress(envelope(img), cfg.metrics.dynamic_range_db), base.string() + ".pgm",
            cfg.metrics.dynamic_range_db);
}

/// beamform: single-PW adjoint or full compound from the frames on disk.
inline Image run_beamform(const ExperimentConfig& cfg, const std::string& mode) {
  const std::vector<RfFrame> frames = load_frames(cfg);
  Image out;
  if (mode == "single") {
    std::vector<double> thetas;
    for (const auto& f : frames) thetas.push_back(f.steering_angle);
    const int idx = closest_to_zero_index(thetas);
    const MeasurementOperator op = make_operator(cfg, frames[idx].steering_angle);
    out = op.adjoint(frames[idx]);
    if (cfg.save_images) export_image(cfg, out, "das_single");
  } else if (mode == "compound") {
    std::vector<Image> adjoints(frames.size());
    parallel_for(static_cast<long long>(frames.size()), effective_threads(cfg.threads),
                 [&](long long i) {
                   const MeasurementOperator op = make_operator(cfg, frames[i].steering_angle);
                   adjoints[i] = op.adjoint(frames[i]);
                 });
    out = compound(adjoints);
    if (cfg.save_images) export_image(cfg, out, "das_compound");
  } else {
    throw std::invalid_argument("beamform: mode must be single or compound");
  }
  return out;
}

/// train: simulate compounded acquisitions of randomized phantoms, normalize,
/// ridge-fit the per-sigma patch maps, and persist the PWDN model.
inline PatchTrainingReport run_train(const ExperimentConfig& cfg, bool verbose = true) {
  cfg.validate();
  if (cfg.denoiser.train_phantoms < 1)
    throw std::invalid_argument("train: need at least one training phantom");

  // randomized training specs, deterministically derived from the master seed
  GaussianRng spec_rng(stage_seed(cfg.seed, SeedStage::TrainingPatches, 0xA11CEull));
  std::vector<PhantomSpec> specs;
  for (int t = 0; t < cfg.denoiser.train_phantoms; ++t) {
    PhantomSpec spec;
    spec.background_std = cfg.phantom.background_std > 0 ? cfg.phantom.background_std : 1.0;
    spec.seed = stage_seed(cfg.seed, SeedStage::Phantom, 0x1000ull + t);
    const int n_cysts = t % 3;
    for (int c = 0; c < n_cysts; ++c) {
      CystSpec cyst;
      const double radius = 0.8e-3 + 1.6e-3 * spec_rng.uniform();
      const double mx = 0.25 * (cfg.grid.x_max - cfg.grid.x_min);
      const double mz = 0.25 * (cfg.grid.z_max - cfg.grid.z_min);
      cyst.x = cfg.grid.x_min + mx + (cfg.grid.x_max - cfg.grid.x_min - 2 * mx) * spec_rng.uniform();
      cyst.z = cfg.grid.z_min + mz + (cfg.grid.z_max - cfg.grid.z_min - 2 * mz) * spec_rng.uniform();
      cyst.radius = radius;
      const double u = spec_rng.uniform();
      cyst.amplitude_scale = u < 0.5 ? 0.0 : (u - 0.5);
      spec.cysts.push_back(cyst);
    }
    specs.push_back(std::move(spec));
  }

  // compounded DAS image per spec, in the normalized diffusion domain
  std::vector<Image> training_images(specs.size());
  const std::vector<double> thetas = make_angles(cfg.angles);
  parallel_for(static_cast<long long>(specs.size()), effective_threads(cfg.threads),
               [&](long long t) {
                 const Image truth = render(specs[t], cfg.grid);
                 Image acc(cfg.grid.axial_count, cfg.grid.lateral_count);
                 for (std::size_t a = 0; a < thetas.size(); ++a) {
                   const MeasurementOperator op = make_operator(cfg, thetas[a]);
                   RfFrame y = op.forward(truth);
                   y = add_channel_noise(
                       y, cfg.channel_noise_gamma,
                       stage_seed(cfg.seed, SeedStage::ChannelNoise, 0x200000ull + t * 4096 + a));
                   const Image adj = op.adjoint(y);
                   for (std::size_t k = 0; k < acc.size(); ++k) acc.pixels[k] += adj.pixels[k];
                 }
                 for (double& v : acc.pixels) v /= static_cast<double>(thetas.size());
                 training_images[t] = scaled_copy(acc, 1.0 / amplitude_scale(acc));
               });

  std::vector<double> grid;
  const int pts = cfg.denoiser.sigma_grid_points;
  for (int g = 0; g < pts; ++g) {
    const double t = pts > 1 ? static_cast<double>(g) / (pts - 1) : 0.0;
    grid.push_back(cfg.denoiser.sigma_grid_min *
                   std::pow(cfg.denoiser.sigma_grid_max / cfg.denoiser.sigma_grid_min, t));
  }
  grid.front() = cfg.denoiser.sigma_grid_min;  // pin endpoints against pow() roundoff
  grid.back() = cfg.denoiser.sigma_grid_max;

  PatchTrainingReport report;
  const LinearPatchDenoiser model = train_linear_denoiser(
      training_images, grid, cfg.denoiser.patch_size, cfg.denoiser.alpha,
      cfg.denoiser.patches_per_sigma, stage_seed(cfg.seed, SeedStage::TrainingPatches, 0), &report);

  std::filesystem::create_directories(cfg.out_dir);
  model.save(model_path(cfg));

  if (verbose) {
    std::ostringstream os;
    os << "sigma,train_mse,identity_mse\n";
    for (const auto& r : report.per_sigma)
      os << format_double(r.sigma) << "," << format_double(r.train_mse) << ","
         << format_double(r.identity_mse) << "\n";
    std::ofstream(std::filesystem::path(cfg.out_dir) / "training_report.csv") << os.str();
  }
  return report;
}

/// reconstruct: das | edm-full | edm-shortcut from the frames on disk.
/// Writes the image, the run log, and appends metrics and timing rows.
inline MetricsRow run_reconstruct(const ExperimentConfig& cfg, const std::string& method) {
  const std::vector<RfFrame> frames = load_frames(cfg);
  std::vector<double> thetas;
  for (const auto& f : frames) thetas.push_back(f.steering_angle);
  const int idx = closest_to_zero_index(thetas);
  const MeasurementOperator op = make_operator(cfg, frames[idx].steering_angle);
  const Image das = op.adjoint(frames[idx]);

  MetricsRow row;
  row.frame_id = std::to_string(cfg.seed);
  row.method = method;
  row.seed = cfg.seed;
  double wall_ms = 0.0;
  Image out;

  if (method == "das") {
    const auto start = std::chrono::steady_clock::now();
    out = das;
    wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  } else if (method == "edm-full" || method == "edm-shortcut") {
    const bool shortcut = method == "edm-shortcut";
    const AnyDenoiser denoiser = make_denoiser(cfg);
    const ReconstructionResult res = std::visit(
        [&](const auto& d) {
          return reconstruct_diffusion(cfg, d, op, frames[idx], das, shortcut, cfg.sampler,
                                       stage_seed(cfg.seed, SeedStage::DiffusionInit, 0));
        },
        denoiser);
    out = res.image;
    wall_ms = res.wall_ms;
    row.denoiser_calls = res.log.total_denoiser_calls;
    row.steps = shortcut ? cfg.sampler.steps : cfg.sampler.n_full;
    row.sigma_k = shortcut ? cfg.sampler.sigma_k : 0.0;
    row.sigma_max = cfg.sampler.sigma_max;
    row.schedule_mode = shortcut ? schedule_mode_name(cfg.sampler.mode) : "-";

    std::ofstream log_os(std::filesystem::path(cfg.out_dir) / ("runlog_" + method + ".csv"));
    res.log.write_csv(log_os);
  } else {
    throw std::invalid_argument("reconstruct: method must be das, edm-full, or edm-shortcut");
  }

  const ImageMetrics m = evaluate_image_metrics(cfg, out);
  row.cnr_db = m.cnr_db;
  row.gcnr = m.gcnr;

  if (cfg.save_images) export_image(cfg, out, "recon_" + method);
  append_rows((std::filesystem::path(cfg.out_dir) / "metrics.csv").string(), kMetricsHeader,
              {to_csv(row)});
  append_rows((std::filesystem::path(cfg.out_dir) / "timings.csv").string(),
              "frame_id,method,steps,schedule_mode,seed,wall_ms",
              {row.frame_id + "," + row.method + "," + std::to_string(row.steps) + "," +
               row.schedule_mode + "," + std::to_string(row.seed) + "," + format_double(wall_ms)});
  return row;
}

/// metrics: score an existing image file against the configured phantom ROIs.
inline MetricsRow run_metrics(const ExperimentConfig& cfg, const std::string& image_path) {
  const Image img = read_pwimg(image_path);
  MetricsRow row;
  row.frame_id = std::filesystem::path(image_path).filename().string();
  row.method = "external";
  row.seed = cfg.seed;
  const ImageMetrics m = evaluate_image_metrics(cfg, img);
  row.cnr_db = m.cnr_db;
  row.gcnr = m.gcnr;
  append_rows((std::filesystem::path(cfg.out_dir) / "metrics.csv").string(), kMetricsHeader,
              {to_csv(row)});
  return row;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOutput {
  std::vector<MetricsRow> rows;
  std::vector<double> wall_ms;  // parallel to rows
};

/// sweep: the full (schedule mode x sigma_max x steps) grid of shortcut
/// reconstructions at fixed sigma_k, repeated over sweep_seeds phantom
/// realizations, plus single-PW and compounded DAS baseline rows.
/// metrics.csv is written in a deterministic order regardless of threading;
/// wall-clock numbers go to timings.csv.
inline SweepOutput run_sweep(const ExperimentConfig& cfg, const std::vector<double>& sigma_max_list,
                             const std::vector<int>& steps_list) {
  cfg.validate();
  if (sigma_max_list.empty() || steps_list.empty())
    throw std::invalid_argument("sweep: sigma_max and steps lists must be nonempty");

  const AnyDenoiser denoiser = make_denoiser(cfg);
  const std::vector<ScheduleMode> modes{ScheduleMode::Rebuild, ScheduleMode::Truncate};
  const long long cells_per_seed =
      static_cast<long long>(modes.size()) * sigma_max_list.size() * steps_list.size();

  SweepOutput out;
  for (int s = 0; s < cfg.sweep_seeds; ++s) {
    const SimulatedAcquisition acq = simulate_acquisition(cfg, static_cast<std::uint64_t>(s));
    const MeasurementOperator op = make_operator(cfg, acq.thetas[acq.single_index]);
    const RfFrame& frame = acq.frames[acq.single_index];
    const std::string frame_id = "p" + std::to_string(s);

    auto baseline_row = [&](const std::string& method, const Image& img) {
      MetricsRow row;
      row.frame_id = frame_id;
      row.method = method;
      row.seed = cfg.seed;
      const ImageMetrics m = evaluate_image_metrics(cfg, img);
      row.cnr_db = m.cnr_db;
      row.gcnr = m.gcnr;
      return row;
    };
    out.rows.push_back(baseline_row("das-1pw", acq.das_single));
    out.wall_ms.push_back(0.0);
    out.rows.push_back(baseline_row("das-75pw", acq.das_compound));
    out.wall_ms.push_back(0.0);

    std::vector<MetricsRow> cell_rows(cells_per_seed);
    std::vector<double> cell_ms(cells_per_seed, 0.0);
    parallel_for(cells_per_seed, effective_threads(cfg.threads), [&](long long c) {
      const long long per_mode = static_cast<long long>(sigma_max_list.size()) * steps_list.size();
      const ScheduleMode mode = modes[c / per_mode];
      const long long rem = c % per_mode;
      const double sigma_max = sigma_max_list[rem / steps_list.size()];
      const int steps = steps_list[rem % steps_list.size()];

      SamplerSettings settings = cfg.sampler;
      settings.mode = mode;
      settings.sigma_max = sigma_max;
      settings.steps = steps;

      const ReconstructionResult res = std::visit(
          [&](const auto& d) {
            return reconstruct_diffusion(
                cfg, d, op, frame, acq.das_single, true, settings,
                stage_seed(cfg.seed, SeedStage::DiffusionInit,
                           static_cast<std::uint64_t>(s) * 1'000'000ull + c));
          },
          denoiser);

      MetricsRow row;
      row.frame_id = frame_id;
      row.method = "edm-shortcut";
      row.steps = steps;
      row.sigma_k = cfg.sampler.sigma_k;
      row.sigma_max = sigma_max;
      row.schedule_mode = schedule_mode_name(mode);
      row.seed = cfg.seed;
      row.denoiser_calls = res.log.total_denoiser_calls;
      const ImageMetrics m = evaluate_image_metrics(cfg, res.image);
      row.cnr_db = m.cnr_db;
      row.gcnr = m.gcnr;
      cell_rows[c] = std::move(row);
      cell_ms[c] = res.wall_ms;
    });
    for (long long c = 0; c < cells_per_seed; ++c) {
      out.rows.push_back(std::move(cell_rows[c]));
      out.wall_ms.push_back(cell_ms[c]);
    }
  }

  std::filesystem::create_directories(cfg.out_dir);
  {
    std::ofstream os(std::filesystem::path(cfg.out_dir) / "metrics.csv", std::ios::trunc);
    os << kMetricsHeader << "\n";
    for (const auto& row : out.rows) os << to_csv(row) << "\n";
  }
  {
    std::ofstream os(std::filesystem::path(cfg.out_dir) / "timings.csv", std::ios::trunc);
    os << "frame_id,method,steps,schedule_mode,wall_ms\n";
    for (std::size_t i = 0; i < out.rows.size(); ++i)
      os << out.rows[i].frame_id << "," << out.rows[i].method << "," << out.rows[i].steps << ","
         << out.rows[i].schedule_mode << "," << format_double(out.wall_ms[i]) << "\n";
  }
  return out;
}

}  // namespace pwus
