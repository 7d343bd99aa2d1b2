// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "pwus/image.hpp"
#include "pwus/rng.hpp"

namespace pwus::test {

inline Image random_image(int nz, int nx, std::uint64_t seed, double std_dev = 1.0) {
  Image img(nz, nx);
  GaussianRng rng(seed);
  for (double& v : img.pixels) v = std_dev * rng.normal();
  return img;
}

inline RfFrame random_frame(int r, int L, std::uint64_t seed, double std_dev = 1.0) {
  RfFrame f(r, L, 0.0);
  GaussianRng rng(seed);
  for (double& v : f.samples) v = std_dev * rng.normal();
  return f;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    m = std::max(m, std::abs(a.pixels[k] - b.pixels[k]));
  return m;
}

}  // namespace pwus::test
