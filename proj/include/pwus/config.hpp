// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pwus/geometry.hpp"
#include "pwus/phantom.hpp"
#include "pwus/sampler.hpp"

namespace pwus {

/// Steering angles: `count` transmissions spanning [-span_deg, +span_deg]
/// uniformly.
struct AngleSetConfig {
  int count = 75;
  double span_deg = 16.0;
};

struct SamplerSettings {
  int n_full = 50;
  double sigma_max = 80.0;
  double sigma_min = 0.002;
  double rho = 7.0;
  double sigma_k = 5.0;
  int steps = 20;
  ScheduleMode mode = ScheduleMode::Rebuild;
  // Data consistency defaults to a few warm-started CG iterations per reverse
  // step: a raw fixed-lambda gradient step either oscillates or stalls against
  // this operator's scaling (see the fixed/line-search rules for the literal
  // forms). lambda keeps its gate role: 0 disables the step entirely.
  double lambda = 1.0;
  DcStepRule dc_rule = DcStepRule::ConjugateGradient;
  int dc_cg_iters = 4;
  double residual_floor = 1e-12;
  int dc_angles = 1;  // measurements used for data consistency (1 = single PW)
};

struct DenoiserSettings {
  std::string kind = "linear";  // linear | gaussian | gmm
  std::string model_path;       // defaults to <out>/denoiser.pwdn when empty

  // linear patch denoiser
  int patch_size = 9;
  double alpha = 1e-3;
  std::uint64_t patches_per_sigma = 200'000;
  int sigma_grid_points = 12;
  double sigma_grid_min = 0.01;
  double sigma_grid_max = 80.0;
  int train_phantoms = 24;

  // closed-form oracles
  double gaussian_mean = 0.0;
  double gaussian_std = 1.0;
  std::vector<double> gmm_weights{0.5, 0.5};
  std::vector<double> gmm_means{-0.2, 0.2};
  std::vector<double> gmm_stds{0.15, 0.15};
};

struct MetricsSettings {
  double dynamic_range_db = 60.0;
  int bins = 256;
  double roi_margin = 3.8e-4;  // [m], about two pixels of the default grid
};

struct ExperimentConfig {
  TransducerGeometry geometry;
  ImagingGrid grid;
  PhantomSpec phantom;
  AngleSetConfig angles;
  Apodization apodization = Apodization::None;  // receive apodization
  double channel_noise_gamma = 0.3;
  DenoiserSettings denoiser;
  SamplerSettings sampler;
  MetricsSettings metrics;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 0;      // 0 = hardware concurrency
  int sweep_seeds = 1;  // phantom realizations per sweep cell
  bool save_images = true;

  ExperimentConfig() {
    // cyst radius = 12 pixels of the default grid
    phantom.background_std = 1.0;
    phantom.cysts.push_back({0.0, 10e-3, 2.274e-3, 0.0});
  }

  void validate() const {
    geometry.validate();
    grid.validate();
    phantom.validate();
    if (angles.count < 1) throw std::invalid_argument("config: angle count must be >= 1");
    if (!(channel_noise_gamma >= 0)) throw std::invalid_argument("config: gamma must be >= 0");
    if (sweep_seeds < 1) throw std::invalid_argument("config: sweep_seeds must be >= 1");
    if (denoiser.kind != "linear" && denoiser.kind != "gaussian" && denoiser.kind != "gmm")
      throw std::invalid_argument("config: denoiser kind must be linear, gaussian, or gmm");
  }
};

inline std::string schedule_mode_name(ScheduleMode mode) {
  return mode == ScheduleMode::Rebuild ? "rebuild" : "truncate";
}

inline ScheduleMode parse_schedule_mode(const std::string& name) {
  if (name == "rebuild") return ScheduleMode::Rebuild;
  if (name == "truncate") return ScheduleMode::Truncate;
  throw std::invalid_argument("config: schedule mode must be rebuild or truncate");
}

inline std::string apodization_name(Apodization apod) {
  return apod == Apodization::Hann ? "hann" : "none";
}

inline Apodization parse_apodization(const std::string& name) {
  if (name == "none") return Apodization::None;
  if (name == "hann") return Apodization::Hann;
  throw std::invalid_argument("config: apodization must be none or hann");
}

inline std::string dc_rule_name(DcStepRule rule) {
  switch (rule) {
    case DcStepRule::FixedGradient: return "fixed";
    case DcStepRule::LineSearch: return "line-search";
    default: return "cg";
  }
}

inline DcStepRule parse_dc_rule(const std::string& name) {
  if (name == "fixed") return DcStepRule::FixedGradient;
  if (name == "line-search") return DcStepRule::LineSearch;
  if (name == "cg") return DcStepRule::ConjugateGradient;
  throw std::invalid_argument("config: dc rule must be fixed, line-search, or cg");
}

}  // namespace pwus
