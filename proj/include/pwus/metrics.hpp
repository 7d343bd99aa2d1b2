// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pwus/image.hpp"
#include "pwus/phantom.hpp"

namespace pwus {

/// Pixel values gathered from the two evaluation ROIs.
struct RoiSamples {
  std::vector<double> inside;
  std::vector<double> outside;
};

inline RoiSamples extract_roi_samples(const Image& img, const RoiMasks& masks) {
  RoiSamples r;
  r.inside.reserve(masks.inside.size());
  r.outside.reserve(masks.outside.size());
  for (auto p : masks.inside) r.inside.push_back(img.pixels[p]);
  for (auto p : masks.outside) r.outside.push_back(img.pixels[p]);
  return r;
}

namespace detail {

inline std::pair<double, double> mean_and_population_var(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, var};
}

}  // namespace detail

/// 20*log10(|mu_in - mu_out| / sqrt(var_in + var_out)), population variances.
/// Equal means return -infinity (serialized as "-inf").
inline double cnr_db(const RoiSamples& r) {
  if (r.inside.size() < 2 || r.outside.size() < 2)
    throw std::invalid_argument("cnr_db: each ROI needs at least 2 samples");
  const auto [mi, vi] = detail::mean_and_population_var(r.inside);
  const auto [mo, vo] = detail::mean_and_population_var(r.outside);
  if (mi == mo) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(std::abs(mi - mo) / std::sqrt(vi + vo));
}

/// Generalized CNR: 1 minus the overlap of the two ROI histograms over shared
/// bin edges spanning the joint range. Always in [0, 1]; a degenerate joint
/// range (all values identical) returns 0.
inline double gcnr(const RoiSamples& r, int bins = 256) {
  if (bins < 2) throw std::invalid_argument("gcnr: need at least 2 bins");
  if (r.inside.empty() || r.outside.empty())
    throw std::invalid_argument("gcnr: both ROIs must be nonempty");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : r.inside) { lo = std::min(lo, v); hi = std::max(hi, v); }
  for (double v : r.outside) { lo = std::min(lo, v); hi = std::max(hi, v); }
  if (!(hi > lo)) return 0.0;

  const double scale = bins / (hi - lo);
  std::vector<double> p_in(bins, 0.0), p_out(bins, 0.0);
  for (double v : r.inside) {
    int b = std::min(static_cast<int>((v - lo) * scale), bins - 1);
    p_in[b] += 1.0;
  }
  for (double v : r.outside) {
    int b = std::min(static_cast<int>((v - lo) * scale), bins - 1);
    p_out[b] += 1.0;
  }
  const double ni = static_cast<double>(r.inside.size());
  const double no = static_cast<double>(r.outside.size());
  double overlap = 0.0;
  for (int b = 0; b < bins; ++b) overlap += std::min(p_in[b] / ni, p_out[b] / no);
  return std::clamp(1.0 - overlap, 0.0, 1.0);
}

}  // namespace pwus
