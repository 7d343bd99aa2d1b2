// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "pwus/geometry.hpp"
#include "pwus/image.hpp"
#include "pwus/rng.hpp"

namespace pwus {

enum class Apodization { None, Hann };

/// One sparse contribution: RF sample (flat index s*L+e) weighted into a pixel.
struct OperatorEntry {
  std::uint32_t frame_index;
  double weight;
};

/// Discretized plane-wave measurement matrix H for one steering angle.
///
/// Column p of H holds the echo samples a unit scatterer at pixel p produces:
/// the round-trip delay per receiving element, split over the two neighboring
/// time samples with linear-interpolation weights. The transmit waveform is a
/// unit pulse, so the same matrix serves as the beamforming matrix (B = H) and
/// forward (scatter) and adjoint (gather) walk the same per-pixel entries.
/// Immutable after construction; safe to share across threads.
class MeasurementOperator {
 public:
  MeasurementOperator(TransducerGeometry geometry, ImagingGrid grid, double theta,
                      Apodization apod = Apodization::None)
      : geometry_(geometry), grid_(grid), theta_(theta) {
    geometry_.validate();
    grid_.validate();
    if (!std::isfinite(theta) || std::abs(theta) >= std::numbers::pi / 2)
      throw std::invalid_argument("operator: |steering angle| must be < pi/2");

    const int L = geometry_.element_count;
    const int r = geometry_.sample_count;
    const double c = geometry_.wave_speed;
    const double fs = geometry_.sample_rate;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);

    std::vector<double> apod_w(L, 1.0);
    if (apod == Apodization::Hann) {
      for (int e = 0; e < L; ++e)
        apod_w[e] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * e / (L - 1));
    }

    const long long l = grid_.pixel_count();
    offsets_.resize(l + 1, 0);
    frame_index_.reserve(static_cast<std::size_t>(l) * L);
    weight_.reserve(static_cast<std::size_t>(l) * L);

    long long p = 0;
    for (int i = 0; i < grid_.axial_count; ++i) {
      const double z = grid_.axial_position(i);
      for (int j = 0; j < grid_.lateral_count; ++j, ++p) {
        const double x = grid_.lateral_position(j);
        const double tx = (z * cos_t + x * sin_t) / c;
        for (int e = 0; e < L; ++e) {
          const double dx = x - geometry_.element_position(e);
          const double tau = tx + std::sqrt(z * z + dx * dx) / c;
          const double t = tau * fs;  // fractional sample position
          if (!(t >= 0.0 && t <= r - 1)) continue;  // out of range: dropped
          const int s0 = static_cast<int>(t);
          const double w1 = t - s0;
          frame_index_.push_back(static_cast<std::uint32_t>(s0) * L + e);
          weight_.push_back((1.0 - w1) * apod_w[e]);
          if (w1 > 0.0) {
            frame_index_.push_back(static_cast<std::uint32_t>(s0 + 1) * L + e);
            weight_.push_back(w1 * apod_w[e]);
          }
        }
        offsets_[p + 1] = frame_index_.size();
      }
    }
  }

  const TransducerGeometry& geometry() const { return geometry_; }
  const ImagingGrid& grid() const { return grid_; }
  double steering_angle() const { return theta_; }

  /// y = Hx
  RfFrame forward(const Image& x) const {
    if (x.nz != grid_.axial_count || x.nx != grid_.lateral_count)
      throw std::invalid_argument("forward: image does not match operator grid");
    RfFrame y(geometry_.sample_count, geometry_.element_count, theta_);
    const long long l = grid_.pixel_count();
    for (long long p = 0; p < l; ++p) {
      const double v = x.pixels[p];
      if (v == 0.0) continue;
      for (std::size_t k = offsets_[p]; k < offsets_[p + 1]; ++k)
        y.samples[frame_index_[k]] += weight_[k] * v;
    }
    return y;
  }

  /// x' = H^T y
  Image adjoint(const RfFrame& y) const {
    if (y.sample_count != geometry_.sample_count || y.element_count != geometry_.element_count)
      throw std::invalid_argument("adjoint: frame does not match operator geometry");
    Image x(grid_.axial_count, grid_.lateral_count);
    const long long l = grid_.pixel_count();
    for (long long p = 0; p < l; ++p) {
      double acc = 0.0;
      for (std::size_t k = offsets_[p]; k < offsets_[p + 1]; ++k)
        acc += weight_[k] * y.samples[frame_index_[k]];
      x.pixels[p] = acc;
    }
    return x;
  }

  /// Stored entries for pixel p (test and inspection access).
  std::span<const std::uint32_t> pixel_frame_indices(long long p) const {
    return {frame_index_.data() + offsets_[p], offsets_[p + 1] - offsets_[p]};
  }
  std::span<const double> pixel_weights(long long p) const {
    return {weight_.data() + offsets_[p], offsets_[p + 1] - offsets_[p]};
  }
  std::size_t entry_count() const { return frame_index_.size(); }

 private:
  TransducerGeometry geometry_;
  ImagingGrid grid_;
  double theta_;
  std::vector<std::size_t> offsets_;        // per-pixel entry ranges (CSR over pixels)
  std::vector<std::uint32_t> frame_index_;  // s * L + e
  std::vector<double> weight_;
};

/// Pixelwise arithmetic mean of per-angle images.
inline Image compound(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("compound: empty image list");
  Image out(images.front().nz, images.front().nx);
  for (const Image& im : images) {
    if (!im.same_shape(out)) throw std::invalid_argument("compound: grid mismatch");
    for (std::size_t k = 0; k < out.size(); ++k) out.pixels[k] += im.pixels[k];
  }
  const double inv = 1.0 / static_cast<double>(images.size());
  for (double& v : out.pixels) v *= inv;
  return out;
}

/// y' = y + n with n i.i.d. Gaussian(0, gamma^2); deterministic given seed.
inline RfFrame add_channel_noise(const RfFrame& y, double gamma, std::uint64_t seed) {
  if (!(gamma >= 0) || !std::isfinite(gamma))
    throw std::invalid_argument("add_channel_noise: gamma must be finite and >= 0");
  RfFrame out = y;
  if (gamma == 0.0) return out;
  GaussianRng rng(seed);
  for (double& v : out.samples) v += gamma * rng.normal();
  return out;
}

}  // namespace pwus
