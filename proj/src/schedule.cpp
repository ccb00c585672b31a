// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/schedule.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace resdiff {

namespace {

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void ScheduleConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("schedule: " + m); };
  if (steps < 2) fail("T must be >= 2, got " + std::to_string(steps));
  if (!std::isfinite(p) || p <= 0) fail("p must be finite and > 0");
  if (!std::isfinite(kappa) || kappa < 0) fail("kappa must be finite and >= 0");
  if (!std::isfinite(eta_first) || !std::isfinite(eta_last)) fail("eta endpoints must be finite");
  if (!(eta_first > 0)) fail("eta_1 must be > 0");
  if (!(eta_first < eta_last)) fail("eta_1 must be < eta_T");
  if (!(eta_last <= 1)) fail("eta_T must be <= 1");
  if (!std::isfinite(first_step_weight) || first_step_weight < 0)
    fail("first-step weight must be finite and >= 0");
}

NoiseSchedule::NoiseSchedule(const ScheduleConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int T = cfg_.steps;
  eta_.assign(static_cast<std::size_t>(T) + 1, 0.0);
  alpha_.assign(static_cast<std::size_t>(T) + 1, 0.0);

  const double span = static_cast<double>(T - 1);
  const double b0 = std::exp(std::log(cfg_.eta_last / cfg_.eta_first) / (2.0 * span));
  const double sqrt_first = std::sqrt(cfg_.eta_first);
  eta_[1] = cfg_.eta_first;
  for (int t = 2; t < T; ++t) {
    const double exponent = std::pow((t - 1) / span, cfg_.p) * span;
    const double root = sqrt_first * std::pow(b0, exponent);
    eta_[t] = root * root;
  }
  eta_[T] = cfg_.eta_last;

  for (int t = 1; t <= T; ++t) {
    alpha_[t] = eta_[t] - eta_[t - 1];
    if (!(alpha_[t] > 0))
      throw std::invalid_argument("schedule: eta is not strictly increasing at t=" +
                                  std::to_string(t));
  }
}

NoiseSchedule NoiseSchedule::from_etas(std::vector<double> eta, double kappa,
                                       double first_step_weight) {
  if (eta.size() < 3) throw std::invalid_argument("schedule: need eta[0..T] with T >= 2");
  if (eta[0] != 0.0) throw std::invalid_argument("schedule: eta[0] must be 0");
  ScheduleConfig cfg;
  cfg.steps = static_cast<int>(eta.size()) - 1;
  cfg.kappa = kappa;
  cfg.eta_first = eta[1];
  cfg.eta_last = eta.back();
  cfg.first_step_weight = first_step_weight;
  cfg.validate();
  NoiseSchedule s(cfg);
  for (std::size_t t = 1; t < eta.size(); ++t) {
    s.alpha_[t] = eta[t] - eta[t - 1];
    if (!std::isfinite(eta[t]) || !(s.alpha_[t] > 0))
      throw std::invalid_argument("schedule: eta is not strictly increasing at t=" +
                                  std::to_string(t));
  }
  s.eta_ = std::move(eta);
  return s;
}

NoiseSchedule build_schedule(const ScheduleConfig& cfg) { return NoiseSchedule(cfg); }

double loss_weight(const NoiseSchedule& s, int t) {
  if (t < 1 || t > s.steps())
    throw std::out_of_range("loss_weight: t=" + std::to_string(t) + " outside 1.." +
                            std::to_string(s.steps()));
  if (t == 1) return s.config().first_step_weight;
  return x0_matching_weight(s.alpha(t), s.eta(t), s.eta(t - 1), s.kappa());
}

double x0_matching_weight(double alpha, double eta, double eta_prev, double kappa) {
  return alpha / (2.0 * kappa * kappa * eta * eta_prev);
}

std::string schedule_csv(const NoiseSchedule& s) {
  const auto& c = s.config();
  std::string out = "# T=" + std::to_string(c.steps) + " p=" + fmt_double(c.p) +
                    " kappa=" + fmt_double(c.kappa) + " eta1=" + fmt_double(c.eta_first) +
                    " etaT=" + fmt_double(c.eta_last) + "\n";
  out += "t,eta,alpha,loss_weight\n";
  for (int t = 1; t <= s.steps(); ++t) {
    out += std::to_string(t) + "," + fmt_double(s.eta(t)) + "," + fmt_double(s.alpha(t)) + "," +
           fmt_double(loss_weight(s, t)) + "\n";
  }
  return out;
}

}  // namespace resdiff
