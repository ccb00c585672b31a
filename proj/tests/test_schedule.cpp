// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "resdiff/schedule.hpp"
#include "test_util.hpp"

using namespace resdiff;

namespace {

double max_golden_error(const std::string& file, const ScheduleConfig& cfg) {
  const NoiseSchedule s(cfg);
  const auto rows = testutil::read_csv(testutil::data_path("golden/" + file));
  REQUIRE(rows.size() == std::size_t(cfg.steps) + 1);
  double worst = 0;
  for (const auto& r : rows) {
    const int t = std::stoi(r[0]);
    worst = std::max(worst, std::fabs(s.eta(t) - std::stod(r[1])));
    if (t >= 1) worst = std::max(worst, std::fabs(s.alpha(t) - std::stod(r[2])));
  }
  return worst;
}

}  // namespace

TEST_CASE("default schedule matches the high-precision golden file") {
  CHECK(max_golden_error("schedule_T15_p0.3.csv", ScheduleConfig{}) <= 1e-10);
}

TEST_CASE("steep schedule matches its golden file") {
  ScheduleConfig cfg;
  cfg.steps = 8;
  cfg.p = 1.5;
  CHECK(max_golden_error("schedule_T8_p1.5.csv", cfg) <= 1e-10);
}

TEST_CASE("endpoints are pinned exactly and eta[0] is zero") {
  const NoiseSchedule s(ScheduleConfig{});
  CHECK(s.eta(0) == 0.0);
  CHECK(s.eta(1) == 1e-4);
  CHECK(s.eta(15) == 0.9999);
  CHECK(s.etas().size() == 16);
}

TEST_CASE("two-step schedule holds only the endpoints") {
  ScheduleConfig cfg;
  cfg.steps = 2;
  cfg.p = 1.0;
  cfg.eta_first = 0.01;
  cfg.eta_last = 1.0;
  const NoiseSchedule s(cfg);
  CHECK(s.eta(0) == 0.0);
  CHECK(s.eta(1) == 0.01);
  CHECK(s.eta(2) == 1.0);
  CHECK(s.alpha(1) == 0.01);
  CHECK(s.alpha(2) == doctest::Approx(0.99).epsilon(1e-15));
}

TEST_CASE("sweep: strictly increasing, positive increments, telescoping sums") {
  for (int T : {2, 3, 5, 15, 50})
    for (double p : {0.1, 0.3, 1.0, 3.0}) {
      ScheduleConfig cfg;
      cfg.steps = T;
      cfg.p = p;
      const NoiseSchedule s(cfg);
      double sum = 0;
      for (int t = 1; t <= T; ++t) {
        CHECK(s.alpha(t) > 0);
        CHECK(s.eta(t) > s.eta(t - 1));
        sum += s.alpha(t);
        CHECK(std::fabs(sum - s.eta(t)) <= 1e-12 * s.eta(t));
      }
      CHECK(std::fabs(sum - cfg.eta_last) <= 1e-12 * cfg.eta_last);
    }
}

TEST_CASE("identical configs give bit-identical arrays") {
  ScheduleConfig cfg;
  cfg.p = 0.7;
  const NoiseSchedule a(cfg), b(cfg);
  for (int t = 0; t <= cfg.steps; ++t) {
    CHECK(a.eta(t) == b.eta(t));
    CHECK(a.alpha(t) == b.alpha(t));
  }
}

TEST_CASE("invalid configs are rejected") {
  auto bad = [](auto mutate) {
    ScheduleConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(build_schedule(cfg), std::invalid_argument);
  };
  bad([](ScheduleConfig& c) { c.steps = 1; });
  bad([](ScheduleConfig& c) { c.eta_first = 0.5, c.eta_last = 0.1; });
  bad([](ScheduleConfig& c) { c.eta_first = c.eta_last; });
  bad([](ScheduleConfig& c) { c.eta_first = 0.0; });
  bad([](ScheduleConfig& c) { c.eta_last = 1.5; });
  bad([](ScheduleConfig& c) { c.p = 0.0; });
  bad([](ScheduleConfig& c) { c.p = -1.0; });
  bad([](ScheduleConfig& c) { c.p = NAN; });
  bad([](ScheduleConfig& c) { c.kappa = -1.0; });
  bad([](ScheduleConfig& c) { c.kappa = INFINITY; });
}

TEST_CASE("loss weight: hand-computed value, t=1 fallback, range checks") {
  const auto s = NoiseSchedule::from_etas({0.0, 0.01, 0.03, 0.2}, 2.0);
  // 0.02 / (2 * 4 * 0.03 * 0.01)
  CHECK(loss_weight(s, 2) == doctest::Approx(25.0 / 3.0).epsilon(1e-14));
  CHECK(loss_weight(s, 1) == 1.0);
  CHECK_THROWS_AS(loss_weight(s, 0), std::out_of_range);
  CHECK_THROWS_AS(loss_weight(s, 4), std::out_of_range);

  const auto s2 = NoiseSchedule::from_etas({0.0, 0.01, 0.03, 0.2}, 2.0, 0.25);
  CHECK(loss_weight(s2, 1) == 0.25);
}

TEST_CASE("loss weight decreases monotonically as kappa grows") {
  double prev = INFINITY;
  for (double kappa : {0.5, 1.0, 2.0, 4.0, 8.0, 100.0}) {
    ScheduleConfig cfg;
    cfg.kappa = kappa;
    const double w = loss_weight(NoiseSchedule(cfg), 7);
    CHECK(w < prev);
    prev = w;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("explicit eta sequences are validated") {
  CHECK_THROWS_AS(NoiseSchedule::from_etas({0.1, 0.2, 0.3}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::from_etas({0.0, 0.2, 0.1}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::from_etas({0.0, 0.2}, 1.0), std::invalid_argument);
}

TEST_CASE("CSV dump has a header echoing the parameters and one row per step") {
  const std::string csv = schedule_csv(NoiseSchedule(ScheduleConfig{}));
  CHECK(csv.rfind("# T=15 p=0.3 kappa=2 ", 0) == 0);
  CHECK(csv.find("t,eta,alpha,loss_weight\n") != std::string::npos);
  int rows = 0;
  for (char c : csv) rows += c == '\n';
  CHECK(rows == 2 + 15);
  CHECK(csv.find("\n15,0.9999,") != std::string::npos);
}
