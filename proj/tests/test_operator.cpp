// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pwus/display.hpp"
#include "pwus/operator.hpp"
#include "test_util.hpp"

using namespace pwus;

namespace {

TransducerGeometry small_geometry(int L = 4, int r = 64) {
  TransducerGeometry g;
  g.element_count = L;
  g.pitch = 0.3e-3;
  g.wave_speed = 1540.0;
  g.sample_rate = 10e6;
  g.sample_count = r;
  return g;
}

ImagingGrid small_grid(int nz = 8, int nx = 8) {
  ImagingGrid grid;
  grid.axial_count = nz;
  grid.lateral_count = nx;
  grid.z_min = 1e-3;
  grid.z_max = 4e-3;
  grid.x_min = -0.6e-3;
  grid.x_max = 0.6e-3;
  return grid;
}

// Brute-force dense H, evaluating the delay formula per (pixel, element,
// sample) without touching the operator's internals.
std::vector<std::vector<double>> dense_oracle(const TransducerGeometry& g, const ImagingGrid& grid,
                                              double theta) {
  const long long l = grid.pixel_count();
  const long long rows = static_cast<long long>(g.sample_count) * g.element_count;
  std::vector<std::vector<double>> H(rows, std::vector<double>(l, 0.0));
  long long p = 0;
  for (int i = 0; i < grid.axial_count; ++i) {
    for (int j = 0; j < grid.lateral_count; ++j, ++p) {
      const double z = grid.axial_position(i);
      const double x = grid.lateral_position(j);
      for (int e = 0; e < g.element_count; ++e) {
        const double xe = g.element_position(e);
        const double tau = (z * std::cos(theta) + x * std::sin(theta)) / g.wave_speed +
                           std::sqrt(z * z + (x - xe) * (x - xe)) / g.wave_speed;
        const double t = tau * g.sample_rate;
        if (!(t >= 0.0 && t <= g.sample_count - 1)) continue;
        const int s0 = static_cast<int>(std::floor(t));
        const double w = t - s0;
        H[static_cast<long long>(s0) * g.element_count + e][p] += 1.0 - w;
        if (w > 0.0) H[static_cast<long long>(s0 + 1) * g.element_count + e][p] += w;
      }
    }
  }
  return H;
}

}  // namespace

TEST_CASE("axial pixel, centered element: delay collapses to 2 z / c") {
  auto g = small_geometry(5, 256);  // odd count puts an element at lateral 0
  ImagingGrid grid = small_grid(1, 1);
  grid.x_min = grid.x_max = 0.0;
  grid.z_min = grid.z_max = 2e-3;

  MeasurementOperator op(g, grid, 0.0);
  const double expected = 2.0 * 2e-3 / g.wave_speed * g.sample_rate;

  const auto idx = op.pixel_frame_indices(0);
  const auto w = op.pixel_weights(0);
  REQUIRE(idx.size() >= 1);

  // entry of the centered element (e = 2)
  double pos = -1.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] % g.element_count == 2) {
      const double s = idx[k] / g.element_count;
      pos = (pos < 0) ? s * w[k] : pos + s * w[k];  // weight-average the pair
    }
  }
  REQUIRE_THAT(pos, Catch::Matchers::WithinAbs(expected, 1e-9));
}

TEST_CASE("mirror-symmetric elements produce identical entries at theta=0") {
  auto g = small_geometry(4, 256);
  ImagingGrid grid = small_grid(1, 1);
  grid.x_min = grid.x_max = 0.0;  // centered pixel
  grid.z_min = grid.z_max = 2e-3;

  MeasurementOperator op(g, grid, 0.0);
  const auto idx = op.pixel_frame_indices(0);
  const auto w = op.pixel_weights(0);

  // elements 1 and 2 are symmetric about x=0, as are 0 and 3
  std::vector<std::pair<int, double>> e1, e2;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const int e = static_cast<int>(idx[k] % g.element_count);
    const int s = static_cast<int>(idx[k] / g.element_count);
    if (e == 1) e1.emplace_back(s, w[k]);
    if (e == 2) e2.emplace_back(s, w[k]);
  }
  REQUIRE(e1 == e2);
}

TEST_CASE("dense brute-force oracle matches the sparse operator") {
  const auto g = small_geometry();
  const auto grid = small_grid();
  const double theta = 0.1;
  MeasurementOperator op(g, grid, theta);
  const auto H = dense_oracle(g, grid, theta);
  const long long l = grid.pixel_count();
  const long long rows = static_cast<long long>(g.sample_count) * g.element_count;

  SECTION("assembled matrix equals the oracle") {
    std::vector<std::vector<double>> dense(rows, std::vector<double>(l, 0.0));
    for (long long p = 0; p < l; ++p) {
      const auto idx = op.pixel_frame_indices(p);
      const auto w = op.pixel_weights(p);
      for (std::size_t k = 0; k < idx.size(); ++k) dense[idx[k]][p] += w[k];
    }
    for (long long row = 0; row < rows; ++row)
      for (long long p = 0; p < l; ++p)
        REQUIRE_THAT(dense[row][p], Catch::Matchers::WithinAbs(H[row][p], 1e-14));
  }

  SECTION("forward equals dense matrix-vector product") {
    const Image x = test::random_image(grid.axial_count, grid.lateral_count, 7);
    const RfFrame y = op.forward(x);
    for (long long row = 0; row < rows; ++row) {
      double acc = 0.0;
      for (long long p = 0; p < l; ++p) acc += H[row][p] * x.pixels[p];
      REQUIRE_THAT(y.samples[row], Catch::Matchers::WithinRel(acc, 1e-12) ||
                                       Catch::Matchers::WithinAbs(acc, 1e-12));
    }
  }

  SECTION("adjoint equals dense transposed product") {
    const RfFrame y = test::random_frame(g.sample_count, g.element_count, 11);
    const Image x = op.adjoint(y);
    for (long long p = 0; p < l; ++p) {
      double acc = 0.0;
      for (long long row = 0; row < rows; ++row) acc += H[row][p] * y.samples[row];
      REQUIRE_THAT(x.pixels[p], Catch::Matchers::WithinRel(acc, 1e-12) ||
                                    Catch::Matchers::WithinAbs(acc, 1e-12));
    }
  }
}

TEST_CASE("stored sample indices are in range and pair weights sum to 1") {
  const auto g = small_geometry(8, 48);  // short frame forces out-of-range drops
  auto grid = small_grid(16, 16);
  grid.z_max = 8e-3;
  MeasurementOperator op(g, grid, 0.05);

  const long long l = grid.pixel_count();
  bool saw_dropped = false;
  for (long long p = 0; p < l; ++p) {
    const auto idx = op.pixel_frame_indices(p);
    const auto w = op.pixel_weights(p);
    std::vector<double> per_element(g.element_count, 0.0);
    std::vector<bool> present(g.element_count, false);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const int s = static_cast<int>(idx[k] / g.element_count);
      REQUIRE(s >= 0);
      REQUIRE(s < g.sample_count);
      per_element[idx[k] % g.element_count] += w[k];
      present[idx[k] % g.element_count] = true;
    }
    for (int e = 0; e < g.element_count; ++e) {
      if (present[e]) REQUIRE_THAT(per_element[e], Catch::Matchers::WithinAbs(1.0, 1e-12));
      else saw_dropped = true;
    }
  }
  REQUIRE(saw_dropped);  // the short frame must actually exercise the drop path
}

TEST_CASE("forward is linear and maps zero to zero") {
  MeasurementOperator op(small_geometry(), small_grid(), 0.1);
  const Image zero(8, 8);
  const RfFrame y0 = op.forward(zero);
  for (double v : y0.samples) REQUIRE(v == 0.0);

  const Image a = test::random_image(8, 8, 1);
  const Image b = test::random_image(8, 8, 2);
  Image sum(8, 8);
  for (std::size_t k = 0; k < sum.size(); ++k) sum.pixels[k] = a.pixels[k] + b.pixels[k];

  const RfFrame ya = op.forward(a);
  const RfFrame yb = op.forward(b);
  const RfFrame ys = op.forward(sum);
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const double expect = ya.samples[k] + yb.samples[k];
    REQUIRE_THAT(ys.samples[k], Catch::Matchers::WithinRel(expect, 1e-12) ||
                                    Catch::Matchers::WithinAbs(expect, 1e-12));
  }
}

TEST_CASE("single unit scatterer lands at the delay-formula samples") {
  const auto g = small_geometry(4, 128);
  auto grid = small_grid(8, 8);
  MeasurementOperator op(g, grid, 0.0);

  const int pi = 4, pj = 3;
  Image x(8, 8);
  x.at(pi, pj) = 1.0;
  const RfFrame y = op.forward(x);

  // per-element oracle straight from the delay formula
  std::vector<double> expected(y.size(), 0.0);
  const double z = grid.axial_position(pi);
  const double xp = grid.lateral_position(pj);
  for (int e = 0; e < g.element_count; ++e) {
    const double xe = g.element_position(e);
    const double tau = z / g.wave_speed + std::sqrt(z * z + (xp - xe) * (xp - xe)) / g.wave_speed;
    const double t = tau * g.sample_rate;
    REQUIRE(t >= 0.0);
    REQUIRE(t <= g.sample_count - 1);
    const int s0 = static_cast<int>(std::floor(t));
    const double w = t - s0;
    expected[static_cast<std::size_t>(s0) * g.element_count + e] += 1.0 - w;
    if (w > 0.0) expected[static_cast<std::size_t>(s0 + 1) * g.element_count + e] += w;
  }
  for (std::size_t k = 0; k < y.size(); ++k)
    REQUIRE_THAT(y.samples[k], Catch::Matchers::WithinAbs(expected[k], 1e-12));
}

TEST_CASE("adjoint identity holds on random operators") {
  for (double theta : {0.0, 0.08, -0.15}) {
    MeasurementOperator op(small_geometry(6, 96), small_grid(12, 10), theta);
    for (int trial = 0; trial < 5; ++trial) {
      const Image x = test::random_image(12, 10, 100 + trial);
      const RfFrame y = test::random_frame(96, 6, 200 + trial);
      const RfFrame hx = op.forward(x);
      const Image hty = op.adjoint(y);
      double lhs = 0.0;
      for (std::size_t k = 0; k < hx.size(); ++k) lhs += hx.samples[k] * y.samples[k];
      const double rhs = dot(x.pixels, hty.pixels);
      const double scale = norm2(hx.samples) * norm2(y.samples);
      REQUIRE(std::abs(lhs - rhs) <= 1e-10 * std::max(scale, 1e-30));
    }
  }
}

TEST_CASE("adjoint of zero frame is zero; point scatterer argmax recovers the pixel") {
  TransducerGeometry g = small_geometry(16, 512);
  g.sample_rate = 25e6;
  ImagingGrid grid;
  grid.axial_count = 32;
  grid.lateral_count = 32;
  grid.z_min = 2e-3;
  grid.z_max = 10e-3;
  grid.x_min = -2e-3;
  grid.x_max = 2e-3;
  MeasurementOperator op(g, grid, 0.0);

  const RfFrame zero(512, 16, 0.0);
  const Image x0 = op.adjoint(zero);
  for (double v : x0.pixels) REQUIRE(v == 0.0);

  Image x(32, 32);
  const int pi = 16, pj = 13;
  x.at(pi, pj) = 1.0;
  const Image psf = op.adjoint(op.forward(x));

  std::size_t best = 0;
  for (std::size_t k = 1; k < psf.size(); ++k)
    if (psf.pixels[k] > psf.pixels[best]) best = k;
  REQUIRE(best == static_cast<std::size_t>(pi) * 32 + pj);
}

TEST_CASE("compounding does not widen the point-spread mainlobe") {
  TransducerGeometry g = small_geometry(32, 900);
  g.sample_rate = 40e6;
  ImagingGrid grid;
  grid.axial_count = 48;
  grid.lateral_count = 48;
  grid.z_min = 3e-3;
  grid.z_max = 13e-3;
  grid.x_min = -4e-3;
  grid.x_max = 4e-3;

  Image point(48, 48);
  point.at(24, 24) = 1.0;

  auto psf_image = [&](const std::vector<double>& thetas) {
    std::vector<Image> adjoints;
    for (double theta : thetas) {
      MeasurementOperator op(g, grid, theta);
      adjoints.push_back(op.adjoint(op.forward(point)));
    }
    return compound(adjoints);
  };

  // lateral -6 dB width around the argmax of the log-compressed envelope
  auto mainlobe_width = [&](const Image& img) {
    const Image db = log_compress(envelope(img), 60.0);
    int bi = 0, bj = 0;
    double best = -1e9;
    for (int i = 0; i < db.nz; ++i)
      for (int j = 0; j < db.nx; ++j)
        if (db.at(i, j) > best) { best = db.at(i, j); bi = i; bj = j; }
    int lo = bj, hi = bj;
    while (lo > 0 && db.at(bi, lo - 1) >= best - 6.0) --lo;
    while (hi < db.nx - 1 && db.at(bi, hi + 1) >= best - 6.0) ++hi;
    return hi - lo + 1;
  };

  const Image single = psf_image({0.0});
  const Image compounded = psf_image({-0.2, -0.1, 0.0, 0.1, 0.2});
  REQUIRE(mainlobe_width(compounded) <= mainlobe_width(single));
}

TEST_CASE("compound averages images") {
  const Image a = test::random_image(6, 5, 1);
  SECTION("single image is returned unchanged") {
    const Image out = compound({a});
    REQUIRE(test::max_abs_diff(out, a) == 0.0);
  }
  SECTION("mean of equal images is that image") {
    const Image out = compound({a, a, a});
    REQUIRE(test::max_abs_diff(out, a) <= 1e-15);
  }
  SECTION("three random images match the elementwise oracle") {
    const Image b = test::random_image(6, 5, 2);
    const Image c = test::random_image(6, 5, 3);
    const Image out = compound({a, b, c});
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double expect = (a.pixels[k] + b.pixels[k] + c.pixels[k]) / 3.0;
      REQUIRE_THAT(out.pixels[k], Catch::Matchers::WithinAbs(expect, 1e-15));
    }
  }
  SECTION("empty list and grid mismatch are rejected") {
    REQUIRE_THROWS_AS(compound({}), std::invalid_argument);
    REQUIRE_THROWS_AS(compound({a, Image(5, 6)}), std::invalid_argument);
  }
}

TEST_CASE("channel noise: exactness at gamma=0, determinism, sample statistics") {
  RfFrame y = test::random_frame(100, 10, 5);

  const RfFrame same = add_channel_noise(y, 0.0, 42);
  for (std::size_t k = 0; k < y.size(); ++k) REQUIRE(same.samples[k] == y.samples[k]);

  const RfFrame n1 = add_channel_noise(y, 0.5, 42);
  const RfFrame n2 = add_channel_noise(y, 0.5, 42);
  for (std::size_t k = 0; k < y.size(); ++k) REQUIRE(n1.samples[k] == n2.samples[k]);

  RfFrame big(1000, 1000, 0.0);
  const RfFrame noisy = add_channel_noise(big, 1.0, 7);
  double mean = 0.0;
  for (double v : noisy.samples) mean += v;
  mean /= static_cast<double>(noisy.size());
  double var = 0.0;
  for (double v : noisy.samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(noisy.size());
  REQUIRE(std::abs(mean) <= 0.01);
  REQUIRE(std::sqrt(var) >= 0.99);
  REQUIRE(std::sqrt(var) <= 1.01);

  REQUIRE_THROWS_AS(add_channel_noise(y, -1.0, 0), std::invalid_argument);
}

TEST_CASE("operator construction rejects invalid input") {
  auto g = small_geometry();
  auto grid = small_grid();
  grid.z_min = 0.0;
  REQUIRE_THROWS_AS(MeasurementOperator(g, grid, 0.0), std::invalid_argument);

  auto bad_geom = small_geometry();
  bad_geom.pitch = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(MeasurementOperator(bad_geom, small_grid(), 0.0), std::invalid_argument);

  REQUIRE_THROWS_AS(MeasurementOperator(small_geometry(), small_grid(), 1.6), std::invalid_argument);
}

TEST_CASE("forward/adjoint reject mismatched dimensions") {
  MeasurementOperator op(small_geometry(), small_grid(), 0.0);
  REQUIRE_THROWS_AS(op.forward(Image(4, 4)), std::invalid_argument);
  REQUIRE_THROWS_AS(op.adjoint(RfFrame(10, 4, 0.0)), std::invalid_argument);
}
