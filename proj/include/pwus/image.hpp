// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pwus {

/// Real-valued pixel grid, axial-major (row i = depth, column j = lateral).
/// Doubles as the scatterer map and every intermediate of the diffusion walk.
struct Image {
  int nz = 0;
  int nx = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int nz_, int nx_, double fill = 0.0)
      : nz(nz_), nx(nx_), pixels(static_cast<std::size_t>(nz_) * nx_, fill) {}

  double& at(int i, int j) { return pixels[static_cast<std::size_t>(i) * nx + j]; }
  double at(int i, int j) const { return pixels[static_cast<std::size_t>(i) * nx + j]; }

  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Image& o) const { return nz == o.nz && nx == o.nx; }
};

/// Per-angle channel data: sample-major r x L samples plus the steering angle
/// that produced them.
struct RfFrame {
  int sample_count = 0;   // r
  int element_count = 0;  // L
  double steering_angle = 0.0;  // [rad]
  std::vector<double> samples;  // index = s * L + e

  RfFrame() = default;
  RfFrame(int r, int L, double theta)
      : sample_count(r), element_count(L), steering_angle(theta),
        samples(static_cast<std::size_t>(r) * L, 0.0) {}

  double& at(int s, int e) { return samples[static_cast<std::size_t>(s) * element_count + e]; }
  double at(int s, int e) const { return samples[static_cast<std::size_t>(s) * element_count + e]; }

  std::size_t size() const { return samples.size(); }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace pwus
