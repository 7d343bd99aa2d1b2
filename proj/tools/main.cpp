// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0
//
// pwus: plane-wave ultrasound reconstruction experiments.
//
//   pwus simulate    render the phantom and write per-angle RF frames
//   pwus beamform    DAS adjoint of the 0-degree frame or the full compound
//   pwus train       fit the linear patch denoiser on simulated compounds
//   pwus reconstruct das | edm-full | edm-shortcut, with metrics
//   pwus sweep       (sigma_max x steps) grid of shortcut reconstructions
//   pwus metrics     score an existing PWIMG file against the phantom ROIs
//
// Every flag can also be set from the --config file (key = value with
// [sections]); command-line flags override the file. The effective
// configuration is echoed into the output directory.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "pwus/pipeline.hpp"

namespace {

// INI sections map onto the dotted option names ([sampler] steps ->
// --sampler.steps). Flat "sampler.steps = 20" entries are accepted too.
class SectionedConfig : public CLI::ConfigBase {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::vector<CLI::ConfigItem> items = CLI::ConfigBase::from_config(input);
    for (auto& item : items) {
      if (item.parents.empty()) continue;
      std::string flat;
      for (const auto& parent : item.parents) flat += parent + ".";
      item.name = flat + item.name;
      item.parents.clear();
    }
    return items;
  }

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    std::ostringstream top;
    std::map<std::string, std::ostringstream> sections;
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      std::string value;
      if (!opt->results().empty()) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
      } else if (default_also) {
        value = opt->get_default_str();
      } else {
        continue;
      }
      if (value.empty()) continue;
      const auto dot = name.find('.');
      if (dot == std::string::npos) {
        top << name << " = " << value << "\n";
      } else {
        sections[name.substr(0, dot)] << name.substr(dot + 1) << " = " << value << "\n";
      }
    }
    std::ostringstream out;
    out << top.str();
    for (auto& [section, body] : sections) out << "\n[" << section << "]\n" << body.str();
    return out.str();
  }
};

void echo_config(const CLI::App& app, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream os(std::filesystem::path(out_dir) / "config_effective.ini");
  os << app.config_to_str(true, true);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plane-wave ultrasound reconstruction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.config_formatter(std::make_shared<SectionedConfig>());
  app.set_config("--config", "", "configuration file (key = value with [sections])");

  pwus::ExperimentConfig cfg;
  std::string mode_name = "rebuild";

  app.add_option("--seed", cfg.seed, "master seed; all stage seeds derive from it");
  app.add_option("--out", cfg.out_dir, "output directory");
  app.add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
  app.add_option("--sweep-seeds", cfg.sweep_seeds, "phantom realizations per sweep");
  app.add_flag("--save-images,!--no-save-images", cfg.save_images, "write PWIMG/PGM outputs");

  app.add_option("--geometry.elements", cfg.geometry.element_count);
  app.add_option("--geometry.pitch", cfg.geometry.pitch);
  app.add_option("--geometry.wave-speed", cfg.geometry.wave_speed);
  app.add_option("--geometry.sample-rate", cfg.geometry.sample_rate);
  app.add_option("--geometry.samples", cfg.geometry.sample_count);

  app.add_option("--grid.nz", cfg.grid.axial_count);
  app.add_option("--grid.nx", cfg.grid.lateral_count);
  app.add_option("--grid.z-min", cfg.grid.z_min);
  app.add_option("--grid.z-max", cfg.grid.z_max);
  app.add_option("--grid.x-min", cfg.grid.x_min);
  app.add_option("--grid.x-max", cfg.grid.x_max);

  double cyst_x = cfg.phantom.cysts[0].x, cyst_z = cfg.phantom.cysts[0].z;
  double cyst_radius = cfg.phantom.cysts[0].radius;
  double cyst_scale = cfg.phantom.cysts[0].amplitude_scale;
  app.add_option("--phantom.background-std", cfg.phantom.background_std);
  app.add_option("--phantom.cyst-x", cyst_x);
  app.add_option("--phantom.cyst-z", cyst_z);
  app.add_option("--phantom.cyst-radius", cyst_radius);
  app.add_option("--phantom.cyst-scale", cyst_scale);

  app.add_option("--angles.count", cfg.angles.count);
  app.add_option("--angles.span-deg", cfg.angles.span_deg);
  app.add_option("--noise.gamma", cfg.channel_noise_gamma);

  app.add_option("--sampler.n-full", cfg.sampler.n_full);
  app.add_option("--sampler.sigma-max", cfg.sampler.sigma_max);
  app.add_option("--sampler.sigma-min", cfg.sampler.sigma_min);
  app.add_option("--sampler.rho", cfg.sampler.rho);
  app.add_option("--sampler.sigma-k", cfg.sampler.sigma_k);
  app.add_option("--sampler.steps", cfg.sampler.steps);
  app.add_option("--sampler.mode", mode_name, "rebuild | truncate");
  app.add_option("--sampler.lambda", cfg.sampler.lambda);
  std::string dc_rule_str = pwus::dc_rule_name(cfg.sampler.dc_rule);
  app.add_option("--sampler.dc-rule", dc_rule_str, "fixed | line-search | cg");
  app.add_option("--sampler.dc-cg-iters", cfg.sampler.dc_cg_iters);
  app.add_option("--sampler.dc-angles", cfg.sampler.dc_angles);

  app.add_option("--denoiser.kind", cfg.denoiser.kind, "linear | gaussian | gmm");
  app.add_option("--denoiser.model", cfg.denoiser.model_path);
  app.add_option("--denoiser.patch-size", cfg.denoiser.patch_size);
  app.add_option("--denoiser.alpha", cfg.denoiser.alpha);
  app.add_option("--denoiser.patches-per-sigma", cfg.denoiser.patches_per_sigma);
  app.add_option("--denoiser.grid-points", cfg.denoiser.sigma_grid_points);
  app.add_option("--denoiser.grid-min", cfg.denoiser.sigma_grid_min);
  app.add_option("--denoiser.grid-max", cfg.denoiser.sigma_grid_max);
  app.add_option("--denoiser.train-phantoms", cfg.denoiser.train_phantoms);
  app.add_option("--denoiser.gaussian-mean", cfg.denoiser.gaussian_mean);
  app.add_option("--denoiser.gaussian-std", cfg.denoiser.gaussian_std);
  app.add_option("--denoiser.gmm-weights", cfg.denoiser.gmm_weights);
  app.add_option("--denoiser.gmm-means", cfg.denoiser.gmm_means);
  app.add_option("--denoiser.gmm-stds", cfg.denoiser.gmm_stds);

  app.add_option("--metrics.dynamic-range-db", cfg.metrics.dynamic_range_db);
  app.add_option("--metrics.bins", cfg.metrics.bins);
  app.add_option("--metrics.roi-margin", cfg.metrics.roi_margin);

  auto* cmd_simulate = app.add_subcommand("simulate", "render phantom, write RF frames");
  auto* cmd_beamform = app.add_subcommand("beamform", "DAS beamform frames from disk");
  std::string beamform_mode = "compound";
  cmd_beamform->add_option("--mode", beamform_mode, "single | compound");
  auto* cmd_train = app.add_subcommand("train", "fit the linear patch denoiser");
  auto* cmd_reconstruct = app.add_subcommand("reconstruct", "run a reconstruction method");
  std::string method = "edm-shortcut";
  cmd_reconstruct->add_option("--method", method, "das | edm-full | edm-shortcut");
  auto* cmd_sweep = app.add_subcommand("sweep", "grid of shortcut reconstructions");
  std::vector<double> sweep_sigma_max{40.0, 60.0, 80.0};
  std::vector<int> sweep_steps{5, 10, 15, 20, 30, 40, 50};
  cmd_sweep->add_option("--sigma-max", sweep_sigma_max, "sigma_max values");
  cmd_sweep->add_option("--steps", sweep_steps, "step counts");
  auto* cmd_metrics = app.add_subcommand("metrics", "score an existing PWIMG file");
  std::string image_path;
  cmd_metrics->add_option("--image", image_path, "PWIMG file to score")->required();

  CLI11_PARSE(app, argc, argv);

  cfg.sampler.mode = pwus::parse_schedule_mode(mode_name);
  cfg.sampler.dc_rule = pwus::parse_dc_rule(dc_rule_str);
  cfg.phantom.cysts[0] = {cyst_x, cyst_z, cyst_radius, cyst_scale};

  try {
    cfg.validate();
    echo_config(app, cfg.out_dir);

    if (cmd_simulate->parsed()) {
      pwus::run_simulate(cfg);
      std::cout << "wrote " << cfg.angles.count << " frames under "
                << pwus::frames_dir(cfg).string() << "\n";
    } else if (cmd_beamform->parsed()) {
      pwus::run_beamform(cfg, beamform_mode);
      std::cout << "beamformed (" << beamform_mode << ") into " << cfg.out_dir << "\n";
    } else if (cmd_train->parsed()) {
      const pwus::PatchTrainingReport report = pwus::run_train(cfg);
      std::cout << "sigma,train_mse,identity_mse\n";
      for (const auto& r : report.per_sigma)
        std::cout << pwus::format_double(r.sigma) << "," << pwus::format_double(r.train_mse) << ","
                  << pwus::format_double(r.identity_mse) << "\n";
      std::cout << "model written to " << pwus::model_path(cfg) << "\n";
    } else if (cmd_reconstruct->parsed()) {
      const pwus::MetricsRow row = pwus::run_reconstruct(cfg, method);
      std::cout << pwus::kMetricsHeader << "\n" << pwus::to_csv(row) << "\n";
    } else if (cmd_sweep->parsed()) {
      const pwus::SweepOutput out = pwus::run_sweep(cfg, sweep_sigma_max, sweep_steps);
      std::cout << "wrote " << out.rows.size() << " rows to "
                << (std::filesystem::path(cfg.out_dir) / "metrics.csv").string() << "\n";
    } else if (cmd_metrics->parsed()) {
      const pwus::MetricsRow row = pwus::run_metrics(cfg, image_path);
      std::cout << pwus::kMetricsHeader << "\n" << pwus::to_csv(row) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
