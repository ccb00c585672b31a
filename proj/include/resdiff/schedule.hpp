// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

namespace resdiff {

struct ScheduleConfig {
  int steps = 15;            // T
  double p = 0.3;            // growth exponent of the shifting sequence
  double kappa = 2.0;        // noise scale
  double eta_first = 1e-4;   // eta_1
  double eta_last = 0.9999;  // eta_T
  // Loss weight reported for t = 1, where the x0-matching weight divides by
  // eta_0 = 0.
  double first_step_weight = 1.0;

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

// Exponential residual-shifting schedule. eta is indexed 0..T with
// eta[0] = 0; alpha[t] = eta[t] - eta[t-1] for t >= 1 and alpha[0] = 0.
// Immutable after construction.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(const ScheduleConfig& cfg);

  // Explicit sequence eta[0..T] with eta[0] = 0, strictly increasing, and
  // eta[T] <= 1. The config records T, kappa and the endpoints.
  static NoiseSchedule from_etas(std::vector<double> eta, double kappa,
                                 double first_step_weight = 1.0);

  const ScheduleConfig& config() const { return cfg_; }
  int steps() const { return cfg_.steps; }
  double kappa() const { return cfg_.kappa; }
  double eta(int t) const { return eta_.at(static_cast<std::size_t>(t)); }
  double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t)); }
  std::span<const double> etas() const { return eta_; }
  std::span<const double> alphas() const { return alpha_; }

 private:
  ScheduleConfig cfg_;
  std::vector<double> eta_;
  std::vector<double> alpha_;
};

NoiseSchedule build_schedule(const ScheduleConfig& cfg);

// Per-step weight of the x0-matching objective,
//   alpha_t / (2 kappa^2 eta_t eta_{t-1}),
// with the configured fallback at t = 1. Requires 1 <= t <= T.
double loss_weight(const NoiseSchedule& s, int t);

// alpha_t / (2 kappa^2 eta_t eta_{t-1}).
double x0_matching_weight(double alpha, double eta, double eta_prev, double kappa);

// "t,eta,alpha,loss_weight" table for t = 1..T, preceded by a '#' line
// echoing the hyperparameters.
std::string schedule_csv(const NoiseSchedule& s);

}  // namespace resdiff
