// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwus/image.hpp"

namespace pwus {

namespace detail {

// FFTW plan creation/destruction is not thread-safe; execution is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Per lateral column, magnitude of the analytic signal along the axial axis
/// (discrete Hilbert transform via the frequency domain). Output is >= 0 and
/// invariant under a global sign flip of the input.
inline Image envelope(const Image& img) {
  const int n = img.nz;
  if (n < 2) throw std::invalid_argument("envelope: need at least 2 axial samples");

  fftw_complex* buf = fftw_alloc_complex(n);
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    fwd = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  Image env(img.nz, img.nx);
  const int half = n / 2;
  for (int j = 0; j < img.nx; ++j) {
    for (int i = 0; i < n; ++i) {
      buf[i][0] = img.at(i, j);
      buf[i][1] = 0.0;
    }
    fftw_execute(fwd);
    // analytic-signal gains: keep DC (and Nyquist for even n), double positives
    for (int k = 1; k < half + (n % 2 ? 1 : 0); ++k) {
      buf[k][0] *= 2.0;
      buf[k][1] *= 2.0;
    }
    for (int k = half + 1; k < n; ++k) {
      buf[k][0] = 0.0;
      buf[k][1] = 0.0;
    }
    fftw_execute(bwd);
    for (int i = 0; i < n; ++i)
      env.at(i, j) = std::hypot(buf[i][0], buf[i][1]) / n;
  }

  {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(buf);
  return env;
}

/// 20*log10(env / max(env)) clamped to [-dynamic_range_db, 0].
/// An all-zero envelope maps to a uniform -dynamic_range_db image.
inline Image log_compress(const Image& env, double dynamic_range_db) {
  if (!(dynamic_range_db > 0)) throw std::invalid_argument("log_compress: dynamic range must be > 0");
  double peak = 0.0;
  for (double v : env.pixels) peak = std::max(peak, v);
  Image out(env.nz, env.nx, -dynamic_range_db);
  if (peak == 0.0) return out;
  for (std::size_t k = 0; k < env.size(); ++k) {
    const double v = env.pixels[k];
    if (v <= 0.0) continue;  // stays clamped at the floor
    out.pixels[k] = std::clamp(20.0 * std::log10(v / peak), -dynamic_range_db, 0.0);
  }
  return out;
}

/// 8-bit grayscale PGM of a log-compressed image: [-dr, 0] dB -> [0, 255].
inline void write_pgm(const Image& img_db, const std::string& path, double dynamic_range_db) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
  os << "P5\n" << img_db.nx << " " << img_db.nz << "\n255\n";
  std::vector<std::uint8_t> row(img_db.nx);
  for (int i = 0; i < img_db.nz; ++i) {
    for (int j = 0; j < img_db.nx; ++j) {
      const double t = (img_db.at(i, j) + dynamic_range_db) / dynamic_range_db;
      row[j] = static_cast<std::uint8_t>(std::clamp(t * 255.0 + 0.5, 0.0, 255.0));
    }
    os.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

}  // namespace pwus
