// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pwus {

/// Linear-array transducer description. Element positions are centered at the
/// lateral origin with strictly increasing spacing equal to the pitch.
struct TransducerGeometry {
  int element_count = 64;      // L
  double pitch = 0.3e-3;       // [m]
  double wave_speed = 1540.0;  // [m/s]
  double sample_rate = 40e6;   // [Hz]
  int sample_count = 1200;     // r, time samples per element

  double element_position(int e) const {
    return (e - 0.5 * (element_count - 1)) * pitch;
  }

  void validate() const {
    if (element_count < 2) throw std::invalid_argument("geometry: element_count must be >= 2");
    if (!(pitch > 0) || !std::isfinite(pitch)) throw std::invalid_argument("geometry: pitch must be finite and > 0");
    if (!(wave_speed > 0) || !std::isfinite(wave_speed)) throw std::invalid_argument("geometry: wave_speed must be finite and > 0");
    if (!(sample_rate > 0) || !std::isfinite(sample_rate)) throw std::invalid_argument("geometry: sample_rate must be finite and > 0");
    if (sample_count < 1) throw std::invalid_argument("geometry: sample_count must be >= 1");
  }
};

/// Rectangular pixel grid covering the imaged region. Axial positions start
/// strictly below the array is not allowed: z_min must be positive.
struct ImagingGrid {
  int axial_count = 96;    // n_z
  int lateral_count = 96;  // n_x
  double z_min = 2e-3;     // [m]
  double z_max = 18e-3;    // [m]
  double x_min = -9e-3;    // [m]
  double x_max = 9e-3;     // [m]

  long long pixel_count() const {
    return static_cast<long long>(axial_count) * lateral_count;
  }

  double axial_step() const {
    return axial_count > 1 ? (z_max - z_min) / (axial_count - 1) : 0.0;
  }
  double lateral_step() const {
    return lateral_count > 1 ? (x_max - x_min) / (lateral_count - 1) : 0.0;
  }

  double axial_position(int i) const { return z_min + i * axial_step(); }
  double lateral_position(int j) const { return x_min + j * lateral_step(); }

  void validate() const {
    if (axial_count < 1 || lateral_count < 1) throw std::invalid_argument("grid: pixel counts must be >= 1");
    if (!(z_min > 0)) throw std::invalid_argument("grid: z_min must be > 0");
    if (!std::isfinite(z_min) || !std::isfinite(z_max) || !std::isfinite(x_min) || !std::isfinite(x_max))
      throw std::invalid_argument("grid: extents must be finite");
    if (!(z_max >= z_min)) throw std::invalid_argument("grid: z_max must be >= z_min");
    if (!(x_max >= x_min)) throw std::invalid_argument("grid: x_max must be >= x_min");
  }

  bool operator==(const ImagingGrid&) const = default;
};

}  // namespace pwus
