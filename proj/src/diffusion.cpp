// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/diffusion.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace resdiff {

namespace {

void require_step(const NoiseSchedule& s, int t, int lo, const char* what) {
  if (t < lo || t > s.steps())
    throw std::out_of_range(std::string(what) + ": t=" + std::to_string(t) + " outside " +
                            std::to_string(lo) + ".." + std::to_string(s.steps()));
}

ImageTensor condition_for(const ImageTensor& y0, int channels) {
  if (y0.channels() == channels) return y0;
  if (y0.channels() == 1) return y0.replicated(channels);
  throw std::invalid_argument("condition has " + std::to_string(y0.channels()) +
                              " channels; expected 1 or " + std::to_string(channels));
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

ImageTensor forward_step(const ImageTensor& x_prev, const ImageTensor& e0, const NoiseSchedule& s,
                         int t, RngState& rng) {
  require_same_shape(x_prev, e0, "forward_step");
  require_step(s, t, 1, "forward_step");
  const double a = s.alpha(t);
  const double noise = s.kappa() * std::sqrt(a);
  ImageTensor out = x_prev;
  auto o = out.data();
  auto e = e0.data();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = static_cast<float>(o[i] + a * e[i] + noise * rng.normal());
  return out;
}

ImageTensor forward_marginal(const ImageTensor& x0, const ImageTensor& y0, const NoiseSchedule& s,
                             int t, RngState& rng) {
  require_step(s, t, 0, "forward_marginal");
  const ImageTensor y = condition_for(y0, x0.channels());
  require_same_shape(x0, y, "forward_marginal");
  if (t == 0) return x0;
  const double eta = s.eta(t);
  const double noise = s.kappa() * std::sqrt(eta);
  ImageTensor out = x0;
  auto o = out.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = static_cast<float>(o[i] + eta * (double(yd[i]) - o[i]) + noise * rng.normal());
  return out;
}

PosteriorCoefficients posterior_coefficients(const NoiseSchedule& s, int t, PosteriorNoise mode) {
  require_step(s, t, 1, "posterior_step");
  PosteriorCoefficients c;
  const double eta_t = s.eta(t);
  const double eta_prev = s.eta(t - 1);
  c.keep = eta_prev / eta_t;
  c.shift = s.alpha(t) / eta_t;
  const double k = s.kappa();
  const double var_ratio = eta_prev * s.alpha(t) / eta_t;
  c.sigma = mode == PosteriorNoise::Variance ? k * std::sqrt(var_ratio) : k * k * var_ratio;
  return c;
}

ImageTensor posterior_step(const ImageTensor& x_t, const ImageTensor& x0_hat,
                           const NoiseSchedule& s, int t, RngState& rng, PosteriorNoise mode) {
  require_same_shape(x_t, x0_hat, "posterior_step");
  const PosteriorCoefficients c = posterior_coefficients(s, t, mode);
  if (t == 1) return x0_hat;
  ImageTensor out = x_t;
  auto o = out.data();
  auto h = x0_hat.data();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = static_cast<float>(c.keep * o[i] + c.shift * h[i] + c.sigma * rng.normal());
  return out;
}

double training_loss(const ImageTensor& f_out, const ImageTensor& x0, const NoiseSchedule& s,
                     int t, bool weighted) {
  require_same_shape(f_out, x0, "training_loss");
  require_step(s, t, 1, "training_loss");
  double sum = 0.0;
  auto a = f_out.data();
  auto b = x0.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - b[i];
    sum += d * d;
  }
  const double mse = a.empty() ? 0.0 : sum / static_cast<double>(a.size());
  return (weighted ? loss_weight(s, t) : 1.0) * mse;
}

ImageTensor sample(const ImageTensor& y0, const Predictor& model, int target_channels,
                   const NoiseSchedule& s, RngState& rng, SampleStats* stats,
                   PosteriorNoise mode) {
  Stopwatch clock;
  const int T = s.steps();
  ImageTensor x = condition_for(y0, target_channels);
  x.set_range(kSignedRange);
  {
    const double noise = s.kappa() * std::sqrt(s.eta(T));
    for (float& v : x.data()) v = static_cast<float>(v + noise * rng.normal());
  }
  int calls = 0;
  for (int t = T; t >= 1; --t) {
    ImageTensor x0_hat = model(x, y0, t);
    ++calls;
    if (!x0_hat.same_shape(x))
      throw std::runtime_error("model returned " + x0_hat.shape_string() + ", expected " +
                               x.shape_string());
    x = posterior_step(x, x0_hat, s, t, rng, mode);
  }
  x.set_range(kSignedRange);
  if (stats != nullptr) {
    stats->denoiser_calls = calls;
    stats->seconds = clock.seconds();
  }
  return x.clamped();
}

void DdpmConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("ddpm: steps must be >= 1");
  if (!(beta_sq_start > 0 && beta_sq_start <= beta_sq_end && beta_sq_end < 1))
    throw std::invalid_argument("ddpm: need 0 < beta_sq_start <= beta_sq_end < 1");
}

DdpmSchedule::DdpmSchedule(const DdpmConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int T = cfg_.steps;
  const auto n = static_cast<std::size_t>(T) + 1;
  alpha_.assign(n, 1.0);
  beta_.assign(n, 0.0);
  alpha_bar_.assign(n, 1.0);
  beta_bar_.assign(n, 0.0);
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : double(t - 1) / (T - 1);
    const double beta_sq = cfg_.beta_sq_start + frac * (cfg_.beta_sq_end - cfg_.beta_sq_start);
    alpha_[t] = std::sqrt(1.0 - beta_sq);
    beta_[t] = std::sqrt(beta_sq);
    alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
    beta_bar_[t] = std::sqrt(1.0 - alpha_bar_[t] * alpha_bar_[t]);
  }
}

ImageTensor ddpm_forward(const ImageTensor& x0, int t, const DdpmSchedule& s, RngState& rng,
                         ImageTensor* noise_out) {
  if (t < 0 || t > s.steps())
    throw std::out_of_range("ddpm_forward: t=" + std::to_string(t) + " out of range");
  if (noise_out != nullptr) *noise_out = ImageTensor(x0.channels(), x0.height(), x0.width(),
                                                     x0.range());
  if (t == 0) return x0;
  const double a = s.alpha_bar(t);
  const double b = s.beta_bar(t);
  ImageTensor out = x0;
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double eps = rng.normal();
    if (noise_out != nullptr) noise_out->data()[i] = static_cast<float>(eps);
    o[i] = static_cast<float>(a * o[i] + b * eps);
  }
  return out;
}

ImageTensor ddpm_sample(const ImageTensor& y0, const Predictor& eps_model, int target_channels,
                        const DdpmSchedule& s, RngState& rng, SampleStats* stats) {
  Stopwatch clock;
  ImageTensor x(target_channels, y0.height(), y0.width(), kSignedRange);
  for (float& v : x.data()) v = static_cast<float>(rng.normal());
  int calls = 0;
  for (int t = s.steps(); t >= 1; --t) {
    const ImageTensor eps = eps_model(x, y0, t);
    ++calls;
    if (!eps.same_shape(x))
      throw std::runtime_error("model returned " + eps.shape_string() + ", expected " +
                               x.shape_string());
    const double inv_a = 1.0 / s.alpha(t);
    const double eps_coef = s.beta(t) * s.beta(t) / s.beta_bar(t);
    const double sigma = t > 1 ? s.beta(t) : 0.0;
    auto xd = x.data();
    auto ed = eps.data();
    for (std::size_t i = 0; i < xd.size(); ++i) {
      double v = inv_a * (xd[i] - eps_coef * ed[i]);
      if (sigma > 0) v += sigma * rng.normal();
      xd[i] = static_cast<float>(v);
    }
  }
  if (stats != nullptr) {
    stats->denoiser_calls = calls;
    stats->seconds = clock.seconds();
  }
  return x.clamped();
}

}  // namespace resdiff
