// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "pwus/schedule.hpp"

using namespace pwus;

TEST_CASE("training-scale schedule hits its endpoints exactly") {
  const NoiseSchedule s = karras_schedule(50, 0.002, 80.0, 7.0);
  REQUIRE(s.sigmas.size() == 51);
  REQUIRE(s.sigmas.front() == 80.0);
  REQUIRE(s.sigmas[49] == 0.002);
  REQUIRE(s.sigmas.back() == 0.0);
  REQUIRE(s.transition_count() == 50);
}

TEST_CASE("rho=1 gives linear spacing") {
  const NoiseSchedule s = karras_schedule(3, 1.0, 4.0, 1.0);
  REQUIRE(s.sigmas.size() == 4);
  REQUIRE(s.sigmas[0] == 4.0);
  REQUIRE_THAT(s.sigmas[1], Catch::Matchers::WithinAbs(2.5, 1e-15));
  REQUIRE(s.sigmas[2] == 1.0);
  REQUIRE(s.sigmas[3] == 0.0);
}

TEST_CASE("middle level matches the extended-precision oracle") {
  const NoiseSchedule s = karras_schedule(50, 0.002, 80.0, 7.0);
  // (80^(1/7) + 25/49*(0.002^(1/7) - 80^(1/7)))^7 evaluated at 40 decimal digits
  REQUIRE_THAT(s.sigmas[25], Catch::Matchers::WithinRel(2.2943227222432082, 1e-12));
}

TEST_CASE("N=1 collapses to [sigma_max, 0]") {
  const NoiseSchedule s = karras_schedule(1, 0.002, 80.0, 7.0);
  REQUIRE(s.sigmas == std::vector<double>{80.0, 0.0});
}

TEST_CASE("schedules are strictly decreasing with exact endpoints") {
  struct Params { int n; double lo, hi, rho; };
  for (const auto& p : {Params{50, 0.002, 80, 7}, Params{20, 0.002, 5, 7},
                        Params{10, 0.5, 60, 3}, Params{2, 1e-4, 1, 7},
                        Params{35, 0.01, 40, 7}}) {
    const NoiseSchedule s = karras_schedule(p.n, p.lo, p.hi, p.rho);
    REQUIRE(static_cast<int>(s.sigmas.size()) == p.n + 1);
    REQUIRE(s.sigmas.front() == p.hi);
    if (p.n > 1) REQUIRE(s.sigmas[p.n - 1] == p.lo);
    REQUIRE(s.sigmas.back() == 0.0);
    for (std::size_t i = 1; i < s.sigmas.size(); ++i)
      REQUIRE(s.sigmas[i] < s.sigmas[i - 1]);
  }
}

TEST_CASE("invalid schedule parameters are rejected") {
  REQUIRE_THROWS_AS(karras_schedule(0, 0.002, 80, 7), std::invalid_argument);
  REQUIRE_THROWS_AS(karras_schedule(10, 80, 0.002, 7), std::invalid_argument);
  REQUIRE_THROWS_AS(karras_schedule(10, 0.0, 80, 7), std::invalid_argument);
  REQUIRE_THROWS_AS(karras_schedule(10, 0.002, 80, 0.0), std::invalid_argument);
}
