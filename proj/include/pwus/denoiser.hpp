// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pwus/image.hpp"

namespace pwus {

/// Denoiser contract: denoise(x, sigma) approximates the posterior mean
/// E[clean | clean + sigma*z = x]. Every implementation must approach the
/// identity as sigma -> 0.
template <typename D>
concept DenoiserLike = requires(const D& d, const Image& x, double sigma) {
  { d.denoise(x, sigma) } -> std::same_as<Image>;
};

/// Exact posterior mean for a Gaussian prior N(mu, prior_std^2):
/// (s^2 x + sigma^2 mu) / (s^2 + sigma^2). Closed-form test oracle.
struct GaussianPriorDenoiser {
  double mean = 0.0;
  double prior_std = 1.0;
  std::optional<Image> mean_image;  // overrides the scalar mean when set

  Image denoise(const Image& x, double sigma) const {
    if (!(prior_std > 0)) throw std::invalid_argument("gaussian denoiser: prior_std must be > 0");
    if (!(sigma >= 0)) throw std::invalid_argument("gaussian denoiser: sigma must be >= 0");
    const double s2 = prior_std * prior_std;
    const double v2 = sigma * sigma;
    const double gain = s2 / (s2 + v2);
    const double noise_gain = v2 / (s2 + v2);
    Image out(x.nz, x.nx);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double mu = mean_image ? mean_image->pixels[k] : mean;
      out.pixels[k] = gain * x.pixels[k] + noise_gain * mu;
    }
    return out;
  }
};

/// Exact posterior mean for a per-pixel-shared Gaussian mixture prior.
/// Responsibilities are normalized in the log domain so extreme |x| stays
/// finite.
struct GmmPixelDenoiser {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;

  void validate() const {
    if (weights.empty() || weights.size() != means.size() || weights.size() != stds.size())
      throw std::invalid_argument("gmm denoiser: component lists must be nonempty and equal length");
    double wsum = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if (!(weights[j] > 0)) throw std::invalid_argument("gmm denoiser: weights must be > 0");
      if (!(stds[j] > 0)) throw std::invalid_argument("gmm denoiser: stds must be > 0");
      wsum += weights[j];
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw std::invalid_argument("gmm denoiser: weights must sum to 1");
  }

  double denoise_value(double x, double sigma) const {
    const std::size_t J = weights.size();
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logr(J);
    for (std::size_t j = 0; j < J; ++j) {
      const double v = stds[j] * stds[j] + sigma * sigma;
      const double d = x - means[j];
      logr[j] = std::log(weights[j]) - 0.5 * std::log(2.0 * std::numbers::pi * v) - d * d / (2.0 * v);
      max_log = std::max(max_log, logr[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < J; ++j) z += std::exp(logr[j] - max_log);
    double out = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double r = std::exp(logr[j] - max_log) / z;
      const double s2 = stds[j] * stds[j];
      const double v = s2 + sigma * sigma;
      out += r * (s2 * x + sigma * sigma * means[j]) / v;
    }
    return out;
  }

  Image denoise(const Image& x, double sigma) const {
    validate();
    if (!(sigma >= 0)) throw std::invalid_argument("gmm denoiser: sigma must be >= 0");
    Image out(x.nz, x.nx);
    for (std::size_t k = 0; k < x.size(); ++k)
      out.pixels[k] = denoise_value(x.pixels[k], sigma);
    return out;
  }
};

/// Fixed-output denoiser, handy in sampler tests.
struct ConstantDenoiser {
  double value = 0.0;
  Image denoise(const Image& x, double) const { return Image(x.nz, x.nx, value); }
};

static_assert(DenoiserLike<GaussianPriorDenoiser>);
static_assert(DenoiserLike<GmmPixelDenoiser>);
static_assert(DenoiserLike<ConstantDenoiser>);

}  // namespace pwus
