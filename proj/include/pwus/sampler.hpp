// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "pwus/denoiser.hpp"
#include "pwus/image.hpp"
#include "pwus/operator.hpp"
#include "pwus/rng.hpp"
#include "pwus/schedule.hpp"

namespace pwus {

/// x_t = x + sigma * z, z ~ N(0, I); deterministic given seed.
inline Image forward_diffuse(const Image& x, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0) || !std::isfinite(sigma))
    throw std::invalid_argument("forward_diffuse: sigma must be finite and >= 0");
  Image out = x;
  if (sigma == 0.0) return out;
  GaussianRng rng(seed);
  for (double& v : out.pixels) v += sigma * rng.normal();
  return out;
}

/// One measurement the sampler must stay consistent with.
/// Non-owning; the operator and frame must outlive the sampler run.
struct MeasurementRef {
  const MeasurementOperator* op = nullptr;
  const RfFrame* frame = nullptr;
};

/// How the data-consistency update moves along the measurement gradient.
///   FixedGradient: x - lambda * H^T r / ||r||, lambda taken verbatim.
///   LineSearch:    same direction, step length minimizing the residual,
///                  relaxed by lambda (descends for any lambda in (0, 2)).
///   ConjugateGradient: lambda > 0 runs cg_iters warm-started CG iterations
///                  on the normal equations; the step count, not lambda,
///                  controls its strength.
enum class DcStepRule { FixedGradient, LineSearch, ConjugateGradient };

/// Gradient-descent step on ||Hx - y||_2 interleaved with sampling.
/// measurement_scale undoes the sampler-domain normalization before H is
/// applied (the sampler walks images whose 99.9th amplitude percentile is 1).
struct DataConsistencyConfig {
  double lambda = 0.1;
  DcStepRule rule = DcStepRule::FixedGradient;
  int cg_iters = 4;
  double measurement_scale = 1.0;
  double residual_floor = 1e-12;
  std::vector<MeasurementRef> measurements;

  void validate() const {
    if (!(lambda >= 0)) throw std::invalid_argument("data consistency: lambda must be >= 0");
    if (cg_iters < 1) throw std::invalid_argument("data consistency: cg_iters must be >= 1");
    if (!(residual_floor > 0)) throw std::invalid_argument("data consistency: residual_floor must be > 0");
    for (const auto& m : measurements)
      if (!m.op || !m.frame) throw std::invalid_argument("data consistency: null measurement");
  }
};

enum class ScheduleMode { Rebuild, Truncate };

/// Shortcut-sampler parameters: inject noise at sigma_k into the single-PW
/// image and run `steps` reverse transitions. In rebuild mode sigma_k is
/// authoritative and a fresh schedule is built from it; in truncate mode the
/// full schedule and the start index n_full - steps are authoritative and the
/// injected level is the scheduled sigma there (logged when it differs from
/// sigma_k).
struct ShortcutConfig {
  double sigma_k = 5.0;
  int steps = 20;
  ScheduleMode mode = ScheduleMode::Rebuild;
  double sigma_max = 80.0;
  double sigma_min = 0.002;
  double rho = 7.0;
  int n_full = 50;

  void validate() const {
    if (!(sigma_k > sigma_min)) throw std::invalid_argument("shortcut: sigma_k must exceed sigma_min");
    if (steps < 1) throw std::invalid_argument("shortcut: steps must be >= 1");
    if (mode == ScheduleMode::Truncate) {
      if (steps > n_full) throw std::invalid_argument("shortcut: truncate mode needs steps <= n_full");
      if (sigma_k > sigma_max) throw std::invalid_argument("shortcut: truncate mode needs sigma_k <= sigma_max");
    }
  }
};

/// Reverse sub-schedule plus the noise level actually injected.
struct ShortcutPlan {
  NoiseSchedule schedule;
  double injected_sigma = 0.0;
  int start_index = 0;  // index into the full schedule (truncate mode)
};

inline ShortcutPlan shortcut_plan(const ShortcutConfig& cfg) {
  cfg.validate();
  ShortcutPlan plan;
  if (cfg.mode == ScheduleMode::Rebuild) {
    plan.schedule = karras_schedule(cfg.steps, cfg.sigma_min, cfg.sigma_k, cfg.rho);
    plan.injected_sigma = cfg.sigma_k;
  } else {
    const NoiseSchedule full = karras_schedule(cfg.n_full, cfg.sigma_min, cfg.sigma_max, cfg.rho);
    plan.start_index = cfg.n_full - cfg.steps;
    plan.schedule.sigmas.assign(full.sigmas.begin() + plan.start_index, full.sigmas.end());
    plan.schedule.level_count = cfg.steps;
    plan.schedule.sigma_min = cfg.sigma_min;
    plan.schedule.sigma_max = plan.schedule.sigmas.front();
    plan.schedule.rho = cfg.rho;
    plan.injected_sigma = plan.schedule.sigmas.front();
  }
  if (plan.schedule.transition_count() < 1)
    throw std::invalid_argument("shortcut: empty sub-schedule");
  return plan;
}

/// Per-step record of a sampler run.
struct RunLogRow {
  int step = 0;
  double sigma_cur = 0.0;
  double sigma_next = 0.0;
  double residual_pre = std::numeric_limits<double>::quiet_NaN();
  double residual_post = std::numeric_limits<double>::quiet_NaN();
  std::int64_t denoiser_calls = 0;  // cumulative
};

struct RunLog {
  std::vector<RunLogRow> rows;
  std::int64_t total_denoiser_calls = 0;
  double requested_sigma_k = std::numeric_limits<double>::quiet_NaN();
  double injected_sigma = std::numeric_limits<double>::quiet_NaN();

  void write_csv(std::ostream& os) const {
    os << "step,sigma_cur,sigma_next,residual_pre,residual_post,denoiser_calls\n";
    for (const auto& r : rows)
      os << r.step << "," << r.sigma_cur << "," << r.sigma_next << "," << r.residual_pre
         << "," << r.residual_post << "," << r.denoiser_calls << "\n";
  }
};

inline std::int64_t count_denoiser_calls(const RunLog& log) { return log.total_denoiser_calls; }

/// ||H x - y||_2 over all configured measurements, in measurement units.
inline double residual_norm(const Image& x, const DataConsistencyConfig& dc) {
  if (dc.measurements.empty()) return std::numeric_limits<double>::quiet_NaN();
  Image scaled = x;
  for (double& v : scaled.pixels) v *= dc.measurement_scale;
  double acc = 0.0;
  for (const auto& m : dc.measurements) {
    const RfFrame pred = m.op->forward(scaled);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double d = pred.samples[k] - m.frame->samples[k];
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

namespace detail {

struct DcResult {
  Image x;
  double residual_pre = std::numeric_limits<double>::quiet_NaN();
};

/// x - lambda * scale * grad / max(residual, floor); the gradient step of the
/// non-squared norm ||H(scale x) - y||_2 once grad = sum_a H_a^T r_a is known.
inline Image l2_descent_update(const Image& x, const Image& grad, double residual,
                               double lambda, double scale, double floor) {
  const double step = lambda * scale / std::max(residual, floor);
  Image out = x;
  for (std::size_t k = 0; k < out.size(); ++k) out.pixels[k] -= step * grad.pixels[k];
  return out;
}

// sum_a H_a^T H_a v, the normal-equations operator in image space
inline Image normal_apply(const Image& v, const DataConsistencyConfig& dc) {
  Image out(v.nz, v.nx);
  for (const auto& m : dc.measurements) {
    const Image back = m.op->adjoint(m.op->forward(v));
    for (std::size_t k = 0; k < out.size(); ++k) out.pixels[k] += back.pixels[k];
  }
  return out;
}

inline DcResult data_consistency_impl(const Image& x, const DataConsistencyConfig& dc) {
  dc.validate();
  if (dc.measurements.empty() || dc.lambda == 0.0) {
    DcResult res{x, std::numeric_limits<double>::quiet_NaN()};
    if (!dc.measurements.empty()) res.residual_pre = residual_norm(x, dc);
    return res;
  }

  Image scaled = x;
  for (double& v : scaled.pixels) v *= dc.measurement_scale;

  double res2 = 0.0;
  Image grad(x.nz, x.nx);
  for (const auto& m : dc.measurements) {
    RfFrame residual = m.op->forward(scaled);
    for (std::size_t k = 0; k < residual.size(); ++k) {
      residual.samples[k] -= m.frame->samples[k];
      res2 += residual.samples[k] * residual.samples[k];
    }
    const Image back = m.op->adjoint(residual);
    for (std::size_t k = 0; k < grad.size(); ++k) grad.pixels[k] += back.pixels[k];
  }
  const double res = std::sqrt(res2);

  if (dc.rule == DcStepRule::LineSearch) {
    // minimize ||r - eta * scale * H d|| over eta along the gradient
    // direction d = sum_a H_a^T r_a; <r, scale*H d> equals scale*||d||^2
    double u2 = 0.0;
    for (const auto& m : dc.measurements) {
      const RfFrame hd = m.op->forward(grad);
      for (double v : hd.samples) u2 += v * v;
    }
    u2 *= dc.measurement_scale * dc.measurement_scale;
    const double d2 = dot(grad.pixels, grad.pixels);
    if (u2 <= 0.0 || d2 <= 0.0) return {x, res};
    const double eta = dc.lambda * dc.measurement_scale * d2 / u2;
    DcResult out{x, res};
    for (std::size_t k = 0; k < out.x.size(); ++k) out.x.pixels[k] -= eta * grad.pixels[k];
    return out;
  }

  if (dc.rule == DcStepRule::ConjugateGradient) {
    // warm-started CG on (scale^2 sum H^T H) x = scale sum H^T y; the initial
    // CG residual is -scale * grad, already in hand
    const double a = dc.measurement_scale;
    DcResult out{x, res};
    Image cg_res = grad;
    for (double& v : cg_res.pixels) v *= -a;
    Image dir = cg_res;
    double rs = dot(cg_res.pixels, cg_res.pixels);
    for (int it = 0; it < dc.cg_iters && rs > 0.0; ++it) {
      Image hdir = normal_apply(dir, dc);
      for (double& v : hdir.pixels) v *= a * a;
      const double denom = dot(dir.pixels, hdir.pixels);
      if (denom <= 0.0) break;
      const double alpha = rs / denom;
      for (std::size_t k = 0; k < out.x.size(); ++k) {
        out.x.pixels[k] += alpha * dir.pixels[k];
        cg_res.pixels[k] -= alpha * hdir.pixels[k];
      }
      const double rs_next = dot(cg_res.pixels, cg_res.pixels);
      if (rs_next <= dc.residual_floor * dc.residual_floor) break;
      const double beta = rs_next / rs;
      for (std::size_t k = 0; k < dir.size(); ++k)
        dir.pixels[k] = cg_res.pixels[k] + beta * dir.pixels[k];
      rs = rs_next;
    }
    return out;
  }

  DcResult out{l2_descent_update(x, grad, res, dc.lambda, dc.measurement_scale, dc.residual_floor),
               res};
  return out;
}

template <DenoiserLike D>
Image heun_step_counted(const D& denoiser, const Image& x, double sigma_cur, double sigma_next,
                        std::int64_t& calls) {
  if (!(sigma_cur > sigma_next) || !(sigma_next >= 0))
    throw std::invalid_argument("heun_step: need sigma_cur > sigma_next >= 0");

  const Image d0 = denoiser.denoise(x, sigma_cur);
  ++calls;
  const double dt = sigma_next - sigma_cur;
  Image euler(x.nz, x.nx);
  std::vector<double> slope(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    slope[k] = (x.pixels[k] - d0.pixels[k]) / sigma_cur;
    euler.pixels[k] = x.pixels[k] + dt * slope[k];
  }
  if (sigma_next == 0.0) return euler;

  const Image d1 = denoiser.denoise(euler, sigma_next);
  ++calls;
  Image out(x.nz, x.nx);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double slope2 = (euler.pixels[k] - d1.pixels[k]) / sigma_next;
    out.pixels[k] = x.pixels[k] + dt * 0.5 * (slope[k] + slope2);
  }
  return out;
}

template <DenoiserLike D>
Image run_reverse(const D& denoiser, Image x, const NoiseSchedule& schedule,
                  const DataConsistencyConfig& dc, RunLog* log) {
  std::int64_t calls = 0;
  const bool want_post = log != nullptr && !dc.measurements.empty();
  for (int t = 0; t < schedule.transition_count(); ++t) {
    const double sigma_cur = schedule.sigmas[t];
    const double sigma_next = schedule.sigmas[t + 1];
    x = heun_step_counted(denoiser, x, sigma_cur, sigma_next, calls);
    DcResult dcres = data_consistency_impl(x, dc);
    x = std::move(dcres.x);
    if (log) {
      RunLogRow row;
      row.step = t;
      row.sigma_cur = sigma_cur;
      row.sigma_next = sigma_next;
      row.residual_pre = dcres.residual_pre;
      row.residual_post = want_post ? residual_norm(x, dc) : dcres.residual_pre;
      row.denoiser_calls = calls;
      log->rows.push_back(row);
    }
  }
  if (log) log->total_denoiser_calls = calls;
  return x;
}

}  // namespace detail

/// Second-order Heun transition from sigma_cur to sigma_next; the final step
/// to sigma_next = 0 degenerates to a single Euler stage.
template <DenoiserLike D>
Image heun_step(const D& denoiser, const Image& x, double sigma_cur, double sigma_next) {
  std::int64_t calls = 0;
  return detail::heun_step_counted(denoiser, x, sigma_cur, sigma_next, calls);
}

/// x <- x - lambda * grad ||Hx - y||_2 (non-squared norm, epsilon-floored).
inline Image data_consistency(const Image& x, const DataConsistencyConfig& dc) {
  return detail::data_consistency_impl(x, dc).x;
}

/// Full reverse diffusion from pure Gaussian noise at sigma_max.
template <DenoiserLike D>
Image sample_full(const D& denoiser, const NoiseSchedule& schedule, int nz, int nx,
                  const DataConsistencyConfig& dc, std::uint64_t seed, RunLog* log = nullptr) {
  if (schedule.transition_count() < 1) throw std::invalid_argument("sample_full: empty schedule");
  Image x = forward_diffuse(Image(nz, nx), schedule.sigmas.front(), seed);
  return detail::run_reverse(denoiser, std::move(x), schedule, dc, log);
}

/// Shortcut sampler: noise-inject the single-PW image to the planned level,
/// then run the truncated reverse walk with data consistency.
template <DenoiserLike D>
Image sample_shortcut(const D& denoiser, const Image& x_s, const ShortcutConfig& cfg,
                      const DataConsistencyConfig& dc, std::uint64_t seed, RunLog* log = nullptr) {
  const ShortcutPlan plan = shortcut_plan(cfg);
  if (log) {
    log->requested_sigma_k = cfg.sigma_k;
    log->injected_sigma = plan.injected_sigma;
  }
  Image x = forward_diffuse(x_s, plan.injected_sigma, seed);
  return detail::run_reverse(denoiser, std::move(x), plan.schedule, dc, log);
}

}  // namespace pwus
