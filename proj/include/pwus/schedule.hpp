// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pwus {

/// Strictly decreasing noise levels sigma_0 = sigma_max > ... >
/// sigma_{N-1} = sigma_min > 0, with a terminal 0 appended. A schedule with N
/// levels therefore drives N reverse-diffusion transitions.
struct NoiseSchedule {
  std::vector<double> sigmas;  // N values plus trailing 0
  int level_count = 0;         // N
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double rho = 0.0;

  int transition_count() const { return static_cast<int>(sigmas.size()) - 1; }
};

/// sigma_i = (smax^(1/rho) + i/(N-1) * (smin^(1/rho) - smax^(1/rho)))^rho.
/// N = 1 collapses to [sigma_max, 0].
inline NoiseSchedule karras_schedule(int n, double sigma_min, double sigma_max, double rho) {
  if (n < 1) throw std::invalid_argument("schedule: N must be >= 1");
  if (!(sigma_max > sigma_min) || !(sigma_min > 0))
    throw std::invalid_argument("schedule: need sigma_max > sigma_min > 0");
  if (!(rho > 0)) throw std::invalid_argument("schedule: rho must be > 0");

  NoiseSchedule sched;
  sched.level_count = n;
  sched.sigma_min = sigma_min;
  sched.sigma_max = sigma_max;
  sched.rho = rho;
  sched.sigmas.reserve(n + 1);
  if (n == 1) {
    sched.sigmas.push_back(sigma_max);
  } else {
    const double hi = std::pow(sigma_max, 1.0 / rho);
    const double lo = std::pow(sigma_min, 1.0 / rho);
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / (n - 1);
      sched.sigmas.push_back(std::pow(hi + t * (lo - hi), rho));
    }
    // pin the endpoints exactly
    sched.sigmas.front() = sigma_max;
    sched.sigmas.back() = sigma_min;
  }
  sched.sigmas.push_back(0.0);
  return sched;
}

}  // namespace pwus
