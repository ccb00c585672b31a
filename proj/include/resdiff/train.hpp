// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "resdiff/diffusion.hpp"
#include "resdiff/model.hpp"
#include "resdiff/rng.hpp"
#include "resdiff/schedule.hpp"

namespace resdiff {

// One (target, condition) pair in [-1, 1]: target has the denoiser's
// out_channels, condition its condition channels.
struct TrainingExample {
  ImageTensor target;
  ImageTensor condition;
};

// A fully drawn training item: network input, regression target and weight.
struct TrainingItem {
  ImageTensor x_t;
  ImageTensor condition;
  ImageTensor target;  // x0 for the residual objective, eps for the baseline
  int t = 1;
  double weight = 1.0;
};

struct TrainConfig {
  int batch_size = 2;
  double learning_rate = 1e-4;
  int max_steps = 1000;
  std::uint64_t seed = 0;
  bool weighted = false;  // x0-matching weight per step instead of uniform
  bool augment = true;    // random flips / quarter turns
  int checkpoint_every = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  // Parameters whose name starts with any of these are neither given
  // gradients nor updated.
  std::vector<std::string> frozen_prefixes;

  void validate() const;
};

// Raised when a loss or gradient becomes non-finite.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int step, std::vector<std::size_t> batch)
      : std::runtime_error(what), step_(step), batch_(std::move(batch)) {}
  int step() const { return step_; }
  const std::vector<std::size_t>& batch() const { return batch_; }

 private:
  int step_;
  std::vector<std::size_t> batch_;
};

// Mean over items of weight * mean((f(x_t, c, t) - target)^2).
template <class T>
double batch_loss(const Denoiser<T>& net, const T* params, std::span<const TrainingItem> items);

// Same loss; writes its gradient into `grads` (resized and zeroed first).
// Parameters covered by `frozen` (entry-aligned mask) receive exactly zero.
template <class T>
double batch_gradients(const Denoiser<T>& net, const T* params, std::span<const TrainingItem> items,
                       std::vector<T>& grads, const std::vector<bool>* frozen = nullptr);

// Entry-aligned frozen mask from name prefixes.
std::vector<bool> frozen_mask(const std::vector<ParamEntry>& entries,
                              const std::vector<std::string>& prefixes);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<float> m;
  std::vector<float> v;
};

// Snapshot sufficient to resume training bit-exactly.
struct TrainState {
  DenoiserParams params;
  AdamState adam;
  RngState rng;
  int step = 0;
};

// Draws one training item for the given objective.
TrainingItem draw_item(const TrainingExample& ex, Objective objective, const NoiseSchedule& s,
                       const DdpmSchedule& ddpm, bool weighted, bool augment, RngState& rng);

// Applies one of the eight flips / quarter turns (0 = identity).
ImageTensor dihedral(const ImageTensor& a, int op);

class Trainer {
 public:
  Trainer(TrainConfig cfg, NoiseSchedule schedule, DdpmSchedule ddpm,
          std::span<const TrainingExample> data, TrainState state);

  // Runs one optimization step and returns the batch loss.
  double step();
  const TrainState& state() const { return state_; }
  int steps_done() const { return state_.step; }
  const TrainConfig& config() const { return cfg_; }

 private:
  TrainConfig cfg_;
  NoiseSchedule schedule_;
  DdpmSchedule ddpm_;
  std::span<const TrainingExample> data_;
  TrainState state_;
  Denoiser<float> net_;
  std::vector<bool> frozen_;
  std::vector<float> grads_;
};

TrainState initial_state(const DenoiserConfig& model, const TrainConfig& cfg);

struct TrainResult {
  TrainState state;
  std::vector<double> losses;  // one per step
};

// Runs until cfg.max_steps. `on_step(step, loss)` is called after each step;
// `on_checkpoint(state)` every cfg.checkpoint_every steps and at the end.
TrainResult train(std::span<const TrainingExample> data, const TrainConfig& cfg,
                  const NoiseSchedule& schedule, const DdpmSchedule& ddpm, TrainState state,
                  const std::function<void(int, double)>& on_step = {},
                  const std::function<void(const TrainState&)>& on_checkpoint = {});

}  // namespace resdiff
