// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "resdiff/rng.hpp"
#include "resdiff/schedule.hpp"
#include "resdiff/tensor.hpp"

namespace resdiff {

// Residual diffusion: the forward chain moves the target x0 toward the
// condition y0 along e0 = y0 - x0,
//   x_t = x_{t-1} + alpha_t e0 + kappa sqrt(alpha_t) eps,
// so that x_t = x0 + eta_t e0 + kappa sqrt(eta_t) eps in closed form.
//
// Tensors passed here are expected in [-1, 1]. A single-channel condition
// is replicated across the target channels wherever a residual is formed.

// Network evaluation f(x_t, y0, t). For the residual process it returns an
// estimate of x0; for the DDPM baseline an estimate of the injected noise.
using Predictor =
    std::function<ImageTensor(const ImageTensor& x_t, const ImageTensor& y0, int t)>;

// How the noise term of the reverse step is read: Variance uses standard
// deviation kappa * sqrt(eta_{t-1} alpha_t / eta_t); Literal multiplies eps
// by kappa^2 eta_{t-1} alpha_t / eta_t directly.
enum class PosteriorNoise { Variance, Literal };

struct SampleStats {
  int denoiser_calls = 0;
  double seconds = 0.0;
};

ImageTensor forward_step(const ImageTensor& x_prev, const ImageTensor& e0, const NoiseSchedule& s,
                         int t, RngState& rng);

// At t = 0 returns x0 unchanged without drawing noise.
ImageTensor forward_marginal(const ImageTensor& x0, const ImageTensor& y0, const NoiseSchedule& s,
                             int t, RngState& rng);

// Coefficients of x_{t-1} = a x_t + b x0_hat + sigma eps.
struct PosteriorCoefficients {
  double keep = 0.0;   // eta_{t-1} / eta_t
  double shift = 0.0;  // alpha_t / eta_t
  double sigma = 0.0;
};
PosteriorCoefficients posterior_coefficients(const NoiseSchedule& s, int t,
                                             PosteriorNoise mode = PosteriorNoise::Variance);

// At t = 1 returns x0_hat verbatim.
ImageTensor posterior_step(const ImageTensor& x_t, const ImageTensor& x0_hat,
                           const NoiseSchedule& s, int t, RngState& rng,
                           PosteriorNoise mode = PosteriorNoise::Variance);

// w_t * mean((f_out - x0)^2) with w_t = loss_weight(s, t) when `weighted`,
// else 1.
double training_loss(const ImageTensor& f_out, const ImageTensor& x0, const NoiseSchedule& s,
                     int t, bool weighted);

// Reverse chain from x_T = y0 + kappa sqrt(eta_T) eps down to t = 1, with
// one model evaluation per step. Output is clamped to [-1, 1].
ImageTensor sample(const ImageTensor& y0, const Predictor& model, int target_channels,
                   const NoiseSchedule& s, RngState& rng, SampleStats* stats = nullptr,
                   PosteriorNoise mode = PosteriorNoise::Variance);

// Gaussian variance-preserving baseline. Per-step coefficients satisfy
// alpha_ddpm^2 + beta_ddpm^2 = 1, with beta_ddpm^2 linear between
// beta_sq_start and beta_sq_end.
struct DdpmConfig {
  int steps = 1000;
  double beta_sq_start = 1e-4;
  double beta_sq_end = 0.02;
  void validate() const;
};

class DdpmSchedule {
 public:
  explicit DdpmSchedule(const DdpmConfig& cfg = {});

  int steps() const { return cfg_.steps; }
  const DdpmConfig& config() const { return cfg_; }
  // Indexed 0..T; index 0 is the identity (alpha = 1, beta = 0).
  double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t)); }
  double beta(int t) const { return beta_.at(static_cast<std::size_t>(t)); }
  // Cumulative: x_t = alpha_bar x0 + beta_bar eps.
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  double beta_bar(int t) const { return beta_bar_.at(static_cast<std::size_t>(t)); }

 private:
  DdpmConfig cfg_;
  std::vector<double> alpha_, beta_, alpha_bar_, beta_bar_;
};

// Cumulative closed form. When `noise_out` is given it receives eps.
ImageTensor ddpm_forward(const ImageTensor& x0, int t, const DdpmSchedule& s, RngState& rng,
                         ImageTensor* noise_out = nullptr);

// Full T-step ancestral sampling with an eps-predicting model conditioned on
// y0. Output is clamped to [-1, 1].
ImageTensor ddpm_sample(const ImageTensor& y0, const Predictor& eps_model, int target_channels,
                        const DdpmSchedule& s, RngState& rng, SampleStats* stats = nullptr);

}  // namespace resdiff
