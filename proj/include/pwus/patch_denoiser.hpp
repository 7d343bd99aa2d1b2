// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwus/image.hpp"
#include "pwus/rng.hpp"

namespace pwus {

/// Trainable stand-in for a learned denoiser: one affine map per noise level,
/// predicting the clean center pixel from a P x P noisy patch. Coefficients
/// are ridge-regressed on simulated compounded images and interpolated
/// linearly between grid noise levels at inference time.
class LinearPatchDenoiser {
 public:
  LinearPatchDenoiser() = default;
  LinearPatchDenoiser(int patch_size, std::vector<double> sigma_grid,
                      std::vector<std::vector<double>> weights, std::vector<double> bias)
      : patch_size_(patch_size), sigma_grid_(std::move(sigma_grid)),
        weights_(std::move(weights)), bias_(std::move(bias)) {
    validate();
  }

  int patch_size() const { return patch_size_; }
  const std::vector<double>& sigma_grid() const { return sigma_grid_; }
  const std::vector<double>& weights_at(std::size_t g) const { return weights_[g]; }
  double bias_at(std::size_t g) const { return bias_[g]; }

  void validate() const {
    if (patch_size_ < 1 || patch_size_ % 2 == 0)
      throw std::invalid_argument("patch denoiser: patch size must be odd and >= 1");
    if (sigma_grid_.size() < 1 || sigma_grid_.size() != weights_.size() || sigma_grid_.size() != bias_.size())
      throw std::invalid_argument("patch denoiser: grid/coefficient size mismatch");
    const std::size_t pp = static_cast<std::size_t>(patch_size_) * patch_size_;
    for (std::size_t g = 0; g < sigma_grid_.size(); ++g) {
      if (g > 0 && !(sigma_grid_[g] > sigma_grid_[g - 1]))
        throw std::invalid_argument("patch denoiser: sigma grid must be strictly increasing");
      if (!(sigma_grid_[g] > 0)) throw std::invalid_argument("patch denoiser: sigma grid must be > 0");
      if (weights_[g].size() != pp) throw std::invalid_argument("patch denoiser: weight length mismatch");
      for (double w : weights_[g])
        if (!std::isfinite(w)) throw std::invalid_argument("patch denoiser: non-finite weight");
      if (!std::isfinite(bias_[g])) throw std::invalid_argument("patch denoiser: non-finite bias");
    }
  }

  /// Affine patch map at sigma; below the grid minimum the output blends
  /// linearly with the identity, reaching exact identity at sigma = 0.
  Image denoise(const Image& x, double sigma) const {
    if (!(sigma >= 0)) throw std::invalid_argument("patch denoiser: sigma must be >= 0");
    if (sigma > sigma_grid_.back())
      throw std::invalid_argument("patch denoiser: sigma above trained grid maximum");

    if (sigma < sigma_grid_.front()) {
      const double t = sigma / sigma_grid_.front();
      if (t == 0.0) return x;
      Image mapped = apply(x, weights_.front(), bias_.front());
      for (std::size_t k = 0; k < mapped.size(); ++k)
        mapped.pixels[k] = (1.0 - t) * x.pixels[k] + t * mapped.pixels[k];
      return mapped;
    }

    const auto hi_it = std::lower_bound(sigma_grid_.begin(), sigma_grid_.end(), sigma);
    const std::size_t hi = static_cast<std::size_t>(hi_it - sigma_grid_.begin());
    if (sigma_grid_[hi] == sigma) return apply(x, weights_[hi], bias_[hi]);
    const std::size_t lo = hi - 1;
    const double t = (sigma - sigma_grid_[lo]) / (sigma_grid_[hi] - sigma_grid_[lo]);
    const std::size_t pp = weights_[lo].size();
    std::vector<double> w(pp);
    for (std::size_t k = 0; k < pp; ++k)
      w[k] = (1.0 - t) * weights_[lo][k] + t * weights_[hi][k];
    return apply(x, w, (1.0 - t) * bias_[lo] + t * bias_[hi]);
  }

  /// "PWDN v1 <P> <grid_len>\n" then per level (sigma, P^2 weights, bias) as
  /// little-endian 64-bit floats.
  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("patch denoiser: cannot open " + path);
    os << "PWDN v1 " << patch_size_ << " " << sigma_grid_.size() << "\n";
    for (std::size_t g = 0; g < sigma_grid_.size(); ++g) {
      os.write(reinterpret_cast<const char*>(&sigma_grid_[g]), sizeof(double));
      os.write(reinterpret_cast<const char*>(weights_[g].data()), weights_[g].size() * sizeof(double));
      os.write(reinterpret_cast<const char*>(&bias_[g]), sizeof(double));
    }
  }

  static LinearPatchDenoiser load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("patch denoiser: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("patch denoiser: missing header");
    std::istringstream hdr(line);
    std::string magic, version;
    int patch = 0;
    std::size_t grid_len = 0;
    hdr >> magic >> version >> patch >> grid_len;
    if (magic != "PWDN" || version != "v1" || patch < 1 || grid_len < 1)
      throw std::runtime_error("patch denoiser: bad header in " + path);
    const std::size_t pp = static_cast<std::size_t>(patch) * patch;
    std::vector<double> grid(grid_len), bias(grid_len);
    std::vector<std::vector<double>> weights(grid_len, std::vector<double>(pp));
    for (std::size_t g = 0; g < grid_len; ++g) {
      is.read(reinterpret_cast<char*>(&grid[g]), sizeof(double));
      is.read(reinterpret_cast<char*>(weights[g].data()), pp * sizeof(double));
      is.read(reinterpret_cast<char*>(&bias[g]), sizeof(double));
    }
    if (!is) throw std::runtime_error("patch denoiser: truncated payload in " + path);
    return LinearPatchDenoiser(patch, std::move(grid), std::move(weights), std::move(bias));
  }

 private:
  // reflective padding keeps training and inference patch statistics aligned
  static int reflect(int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  }

  Image apply(const Image& x, const std::vector<double>& w, double b) const {
    const int h = patch_size_ / 2;
    Image out(x.nz, x.nx);
    for (int i = 0; i < x.nz; ++i) {
      for (int j = 0; j < x.nx; ++j) {
        double acc = b;
        std::size_t k = 0;
        for (int di = -h; di <= h; ++di) {
          const int ii = reflect(i + di, x.nz);
          for (int dj = -h; dj <= h; ++dj, ++k)
            acc += w[k] * x.at(ii, reflect(j + dj, x.nx));
        }
        out.at(i, j) = acc;
      }
    }
    return out;
  }

  int patch_size_ = 0;
  std::vector<double> sigma_grid_;
  std::vector<std::vector<double>> weights_;  // per sigma, P^2 each
  std::vector<double> bias_;

  friend struct PatchTrainingReport;
};

/// Per-sigma training diagnostics.
struct PatchSigmaReport {
  double sigma = 0.0;
  double train_mse = 0.0;     // mean squared error of the learned map
  double identity_mse = 0.0;  // baseline: predict the noisy center pixel
};

struct PatchTrainingReport {
  std::vector<PatchSigmaReport> per_sigma;
};

/// Ridge-regress one affine patch map per sigma from clean images. The bias
/// term is left unregularized so the large-alpha limit lands on the mean
/// center value. Deterministic given seed.
inline LinearPatchDenoiser train_linear_denoiser(const std::vector<Image>& clean_images,
                                                 const std::vector<double>& sigma_grid,
                                                 int patch_size, double alpha,
                                                 std::size_t patches_per_sigma,
                                                 std::uint64_t seed,
                                                 PatchTrainingReport* report = nullptr) {
  if (clean_images.empty()) throw std::invalid_argument("train: no clean images");
  if (patch_size < 1 || patch_size % 2 == 0) throw std::invalid_argument("train: patch size must be odd");
  if (!(alpha >= 0)) throw std::invalid_argument("train: alpha must be >= 0");
  for (std::size_t g = 1; g < sigma_grid.size(); ++g)
    if (!(sigma_grid[g] > sigma_grid[g - 1]))
      throw std::invalid_argument("train: sigma grid must be strictly increasing");
  if (sigma_grid.empty() || !(sigma_grid.front() > 0))
    throw std::invalid_argument("train: sigma grid must be positive");
  const std::size_t pp = static_cast<std::size_t>(patch_size) * patch_size;
  if (patches_per_sigma < 50 * pp)
    throw std::invalid_argument("train: need at least 50 * P^2 patches per sigma");

  const int dim = static_cast<int>(pp) + 1;  // weights + bias
  const int h = patch_size / 2;
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
  if (report) report->per_sigma.clear();

  for (std::size_t g = 0; g < sigma_grid.size(); ++g) {
    const double sigma = sigma_grid[g];
    GaussianRng rng(stage_seed(seed, SeedStage::TrainingPatches, g));

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd cross = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd row(dim);
    double sum_b2 = 0.0, identity_se = 0.0;

    for (std::size_t m = 0; m < patches_per_sigma; ++m) {
      const Image& img = clean_images[rng.index(clean_images.size())];
      const int ci = static_cast<int>(rng.index(img.nz));
      const int cj = static_cast<int>(rng.index(img.nx));
      std::size_t k = 0;
      for (int di = -h; di <= h; ++di) {
        int ii = ci + di;
        if (ii < 0) ii = -ii - 1;
        if (ii >= img.nz) ii = 2 * img.nz - 1 - ii;
        for (int dj = -h; dj <= h; ++dj, ++k) {
          int jj = cj + dj;
          if (jj < 0) jj = -jj - 1;
          if (jj >= img.nx) jj = 2 * img.nx - 1 - jj;
          row[static_cast<int>(k)] = img.at(ii, jj) + sigma * rng.normal();
        }
      }
      row[dim - 1] = 1.0;
      const double target = img.at(ci, cj);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(row);
      cross += row * target;
      sum_b2 += target * target;
      const double center_noisy = row[static_cast<int>(pp / 2)];
      identity_se += (center_noisy - target) * (center_noisy - target);
    }
    gram = gram.selfadjointView<Eigen::Lower>();

    Eigen::MatrixXd reg = gram;
    for (int k = 0; k + 1 < dim; ++k) reg(k, k) += alpha;  // bias unregularized
    const Eigen::LDLT<Eigen::MatrixXd> solver(reg);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("train: singular normal equations (check alpha and data)");
    const Eigen::VectorXd theta = solver.solve(cross);
    if (!theta.allFinite())
      throw std::runtime_error("train: non-finite ridge solution (ill-conditioned normal equations)");

    weights.emplace_back(theta.data(), theta.data() + pp);
    bias.push_back(theta[dim - 1]);

    if (report) {
      const double n = static_cast<double>(patches_per_sigma);
      // ||A theta - b||^2 = theta' G theta - 2 theta' c + sum b^2
      const double sse = theta.dot(gram * theta) - 2.0 * theta.dot(cross) + sum_b2;
      report->per_sigma.push_back({sigma, std::max(sse, 0.0) / n, identity_se / n});
    }
  }

  return LinearPatchDenoiser(patch_size, sigma_grid, std::move(weights), std::move(bias));
}

}  // namespace pwus
