// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pwus/geometry.hpp"
#include "pwus/image.hpp"
#include "pwus/rng.hpp"

namespace pwus {

struct CystSpec {
  double x = 0.0;       // lateral center [m]
  double z = 0.0;       // axial center [m]
  double radius = 0.0;  // [m]
  double amplitude_scale = 0.0;  // 0 = anechoic
};

struct PointTargetSpec {
  double x = 0.0;
  double z = 0.0;
  double amplitude = 1.0;
};

/// Synthetic tissue description: speckle background with optional anechoic or
/// hypoechoic disks and point targets. One scatterer per pixel.
struct PhantomSpec {
  double background_std = 1.0;
  std::vector<CystSpec> cysts;
  std::vector<PointTargetSpec> points;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(background_std >= 0)) throw std::invalid_argument("phantom: background_std must be >= 0");
    for (const auto& c : cysts) {
      if (!(c.radius > 0)) throw std::invalid_argument("phantom: cyst radius must be > 0");
      if (!(c.amplitude_scale >= 0 && c.amplitude_scale <= 1))
        throw std::invalid_argument("phantom: amplitude_scale must be in [0,1]");
    }
  }
};

namespace detail {

inline bool inside_grid(const ImagingGrid& g, double x, double z) {
  return x >= g.x_min && x <= g.x_max && z >= g.z_min && z <= g.z_max;
}

}  // namespace detail

/// Deterministic scatterer map: background ~ N(0, background_std^2), scaled by
/// amplitude_scale inside each cyst disk, point targets added at the nearest
/// pixel.
inline Image render(const PhantomSpec& spec, const ImagingGrid& grid) {
  spec.validate();
  grid.validate();
  for (const auto& c : spec.cysts)
    if (!detail::inside_grid(grid, c.x, c.z))
      throw std::invalid_argument("phantom: cyst center outside grid extent");
  for (const auto& p : spec.points)
    if (!detail::inside_grid(grid, p.x, p.z))
      throw std::invalid_argument("phantom: point target outside grid extent");

  Image map(grid.axial_count, grid.lateral_count);
  GaussianRng rng(spec.seed);
  for (double& v : map.pixels) v = spec.background_std * rng.normal();

  for (const auto& c : spec.cysts) {
    for (int i = 0; i < grid.axial_count; ++i) {
      const double dz = grid.axial_position(i) - c.z;
      for (int j = 0; j < grid.lateral_count; ++j) {
        const double dx = grid.lateral_position(j) - c.x;
        if (dz * dz + dx * dx < c.radius * c.radius) map.at(i, j) *= c.amplitude_scale;
      }
    }
  }

  for (const auto& p : spec.points) {
    int bi = 0, bj = 0;
    double best = std::numeric_limits<double>::max();
    for (int i = 0; i < grid.axial_count; ++i) {
      const double dz = grid.axial_position(i) - p.z;
      for (int j = 0; j < grid.lateral_count; ++j) {
        const double dx = grid.lateral_position(j) - p.x;
        const double d2 = dz * dz + dx * dx;
        if (d2 < best) { best = d2; bi = i; bj = j; }
      }
    }
    map.at(bi, bj) += p.amplitude;
  }
  return map;
}

/// Evaluation ROIs around the first cyst: pixels strictly inside
/// radius - margin, and an equal-area annulus starting at radius + margin
/// (outer radius chosen analytically so the areas match).
struct RoiMasks {
  std::vector<std::uint32_t> inside;
  std::vector<std::uint32_t> outside;
};

inline RoiMasks roi_masks(const PhantomSpec& spec, const ImagingGrid& grid, double margin) {
  if (spec.cysts.empty()) throw std::invalid_argument("roi_masks: phantom has no cyst");
  if (!(margin >= 0)) throw std::invalid_argument("roi_masks: margin must be >= 0");
  const CystSpec& c = spec.cysts.front();
  const double a = c.radius - margin;              // inside disk radius
  const double b = c.radius + margin;              // annulus inner radius
  if (!(a > 0)) throw std::invalid_argument("roi_masks: margin leaves no inside region");
  const double outer = std::sqrt(a * a + b * b);   // equal-area outer radius

  RoiMasks masks;
  std::uint32_t p = 0;
  for (int i = 0; i < grid.axial_count; ++i) {
    const double dz = grid.axial_position(i) - c.z;
    for (int j = 0; j < grid.lateral_count; ++j, ++p) {
      const double dx = grid.lateral_position(j) - c.x;
      const double d2 = dz * dz + dx * dx;
      if (d2 < a * a) masks.inside.push_back(p);
      else if (d2 > b * b && d2 <= outer * outer) masks.outside.push_back(p);
    }
  }
  if (masks.inside.empty() || masks.outside.empty())
    throw std::invalid_argument("roi_masks: margin produces an empty mask");
  return masks;
}

}  // namespace pwus
