// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/train.hpp"

#include <cmath>

#include "resdiff/parallel.hpp"

namespace resdiff {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (max_steps < 0) fail("max_steps must be >= 0");
  if (checkpoint_every < 0) fail("checkpoint cadence must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) fail("Adam betas must be in [0,1)");
  if (!(adam_epsilon > 0)) fail("Adam epsilon must be > 0");
  if (!(grad_clip >= 0)) fail("grad_clip must be >= 0");
}

std::vector<bool> frozen_mask(const std::vector<ParamEntry>& entries,
                              const std::vector<std::string>& prefixes) {
  std::vector<bool> mask(entries.size(), false);
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (const auto& p : prefixes)
      if (entries[i].name.rfind(p, 0) == 0) mask[i] = true;
  return mask;
}

namespace {

template <class T>
double item_loss_and_grad(const Denoiser<T>& net, const T* params, const TrainingItem& item,
                          double scale, std::vector<T>* grads) {
  const nn::Feature<T> input = to_feature<T>(item.x_t, item.condition);
  Trace<T>* trace_ptr = nullptr;
  std::unique_ptr<Trace<T>> trace;
  if (grads != nullptr) {
    trace = std::make_unique<Trace<T>>();
    trace_ptr = trace.get();
  }
  const nn::Feature<T> out = net.forward(params, input, item.t, trace_ptr);
  if (out.size() != item.target.size())
    throw std::invalid_argument("target has " + std::to_string(item.target.size()) +
                                " values, network produced " + std::to_string(out.size()));
  const auto target = item.target.data();
  const double n = static_cast<double>(out.size());
  double sum = 0.0;
  nn::Feature<T> dout(out.channels, out.height, out.width);
  const double coef = 2.0 * item.weight * scale / n;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = double(out.data[i]) - double(target[i]);
    sum += d * d;
    dout.data[i] = static_cast<T>(coef * d);
  }
  if (grads != nullptr) {
    grads->assign(net.parameter_count(), T(0));
    net.backward(params, *trace_ptr, dout, grads->data());
  }
  return item.weight * sum / n;
}

void zero_frozen(const std::vector<ParamEntry>& entries, const std::vector<bool>& frozen,
                 auto& grads) {
  for (std::size_t e = 0; e < entries.size(); ++e)
    if (frozen[e])
      std::fill_n(grads.begin() + static_cast<std::ptrdiff_t>(entries[e].offset), entries[e].count,
                  0);
}

}  // namespace

template <class T>
double batch_loss(const Denoiser<T>& net, const T* params, std::span<const TrainingItem> items) {
  std::vector<double> losses(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    losses[i] = item_loss_and_grad<T>(net, params, items[i], 1.0, nullptr);
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return items.empty() ? 0.0 : total / double(items.size());
}

template <class T>
double batch_gradients(const Denoiser<T>& net, const T* params, std::span<const TrainingItem> items,
                       std::vector<T>& grads, const std::vector<bool>* frozen) {
  const double scale = items.empty() ? 0.0 : 1.0 / double(items.size());
  std::vector<double> losses(items.size());
  std::vector<std::vector<T>> per_item(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    losses[i] = item_loss_and_grad<T>(net, params, items[i], scale, &per_item[i]);
  });
  grads.assign(net.parameter_count(), T(0));
  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    total += losses[i];
    for (std::size_t j = 0; j < grads.size(); ++j) grads[j] += per_item[i][j];
  }
  if (frozen != nullptr) zero_frozen(net.entries(), *frozen, grads);
  return total * scale;
}

template double batch_loss<float>(const Denoiser<float>&, const float*,
                                  std::span<const TrainingItem>);
template double batch_loss<double>(const Denoiser<double>&, const double*,
                                   std::span<const TrainingItem>);
template double batch_gradients<float>(const Denoiser<float>&, const float*,
                                       std::span<const TrainingItem>, std::vector<float>&,
                                       const std::vector<bool>*);
template double batch_gradients<double>(const Denoiser<double>&, const double*,
                                        std::span<const TrainingItem>, std::vector<double>&,
                                        const std::vector<bool>*);

ImageTensor dihedral(const ImageTensor& a, int op) {
  const bool transpose = (op & 4) != 0;
  const bool flip_y = (op & 2) != 0;
  const bool flip_x = (op & 1) != 0;
  const int oh = transpose ? a.width() : a.height();
  const int ow = transpose ? a.height() : a.width();
  ImageTensor out(a.channels(), oh, ow, a.range());
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        int sy = transpose ? x : y;
        int sx = transpose ? y : x;
        if (flip_y) sy = a.height() - 1 - sy;
        if (flip_x) sx = a.width() - 1 - sx;
        out.at(c, y, x) = a.at(c, sy, sx);
      }
  return out;
}

TrainingItem draw_item(const TrainingExample& ex, Objective objective, const NoiseSchedule& s,
                       const DdpmSchedule& ddpm, bool weighted, bool augment, RngState& rng) {
  int op = 0;
  if (augment) {
    op = static_cast<int>(rng.uniform_int(0, 7));
    if (ex.target.height() != ex.target.width()) op &= 3;
  }
  TrainingItem item;
  const ImageTensor x0 = op == 0 ? ex.target : dihedral(ex.target, op);
  item.condition = op == 0 ? ex.condition : dihedral(ex.condition, op);
  if (objective == Objective::X0) {
    item.t = static_cast<int>(rng.uniform_int(1, s.steps()));
    item.x_t = forward_marginal(x0, item.condition, s, item.t, rng);
    item.target = x0;
    item.weight = weighted ? loss_weight(s, item.t) : 1.0;
  } else {
    item.t = static_cast<int>(rng.uniform_int(1, ddpm.steps()));
    ImageTensor eps;
    item.x_t = ddpm_forward(x0, item.t, ddpm, rng, &eps);
    item.target = std::move(eps);
    item.weight = 1.0;
  }
  return item;
}

TrainState initial_state(const DenoiserConfig& model, const TrainConfig& cfg) {
  TrainState st;
  st.params = init_params(model, cfg.seed);
  st.adam.m.assign(st.params.count(), 0.0f);
  st.adam.v.assign(st.params.count(), 0.0f);
  st.rng = RngState(mix_seed(cfg.seed + 1));
  return st;
}

Trainer::Trainer(TrainConfig cfg, NoiseSchedule schedule, DdpmSchedule ddpm,
                 std::span<const TrainingExample> data, TrainState state)
    : cfg_(std::move(cfg)),
      schedule_(std::move(schedule)),
      ddpm_(std::move(ddpm)),
      data_(data),
      state_(std::move(state)),
      net_(state_.params.config) {
  cfg_.validate();
  if (data_.empty()) throw std::invalid_argument("training set is empty");
  if (state_.adam.m.size() != state_.params.count() || state_.adam.v.size() != state_.params.count())
    throw std::invalid_argument("optimizer state does not match parameter count");
  frozen_ = frozen_mask(state_.params.entries, cfg_.frozen_prefixes);
}

double Trainer::step() {
  const int B = cfg_.batch_size;
  std::vector<std::size_t> indices(static_cast<std::size_t>(B));
  std::vector<TrainingItem> items;
  items.reserve(indices.size());
  for (auto& idx : indices) {
    idx = static_cast<std::size_t>(state_.rng.uniform_int(0, std::int64_t(data_.size()) - 1));
    items.push_back(draw_item(data_[idx], state_.params.config.objective, schedule_, ddpm_,
                              cfg_.weighted, cfg_.augment, state_.rng));
  }
  const double loss = batch_gradients(net_, state_.params.values.data(),
                                      std::span<const TrainingItem>(items), grads_, &frozen_);
  double norm_sq = 0.0;
  for (float g : grads_) norm_sq += double(g) * g;
  if (!std::isfinite(loss) || !std::isfinite(norm_sq))
    throw NumericError("non-finite loss or gradient at step " + std::to_string(state_.step + 1),
                       state_.step + 1, indices);
  const double norm = std::sqrt(norm_sq);
  const double clip = (cfg_.grad_clip > 0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;

  AdamState& a = state_.adam;
  ++a.step;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(a.step));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(a.step));
  const auto& entries = state_.params.entries;
  float* p = state_.params.values.data();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (frozen_[e]) continue;
    const std::size_t end = entries[e].offset + entries[e].count;
    for (std::size_t i = entries[e].offset; i < end; ++i) {
      const double g = double(grads_[i]) * clip;
      const double m = cfg_.beta1 * a.m[i] + (1.0 - cfg_.beta1) * g;
      const double v = cfg_.beta2 * a.v[i] + (1.0 - cfg_.beta2) * g * g;
      a.m[i] = static_cast<float>(m);
      a.v[i] = static_cast<float>(v);
      p[i] = static_cast<float>(p[i] - cfg_.learning_rate * (m / bc1) /
                                           (std::sqrt(v / bc2) + cfg_.adam_epsilon));
    }
  }
  ++state_.step;
  if (!state_.params.all_finite())
    throw NumericError("non-finite parameter after step " + std::to_string(state_.step),
                       state_.step, indices);
  return loss;
}

TrainResult train(std::span<const TrainingExample> data, const TrainConfig& cfg,
                  const NoiseSchedule& schedule, const DdpmSchedule& ddpm, TrainState state,
                  const std::function<void(int, double)>& on_step,
                  const std::function<void(const TrainState&)>& on_checkpoint) {
  Trainer trainer(cfg, schedule, ddpm, data, std::move(state));
  TrainResult result;
  while (trainer.steps_done() < cfg.max_steps) {
    const double loss = trainer.step();
    result.losses.push_back(loss);
    if (on_step) on_step(trainer.steps_done(), loss);
    if (on_checkpoint && cfg.checkpoint_every > 0 &&
        trainer.steps_done() % cfg.checkpoint_every == 0 && trainer.steps_done() < cfg.max_steps)
      on_checkpoint(trainer.state());
  }
  if (on_checkpoint) on_checkpoint(trainer.state());
  result.state = trainer.state();
  return result;
}

}  // namespace resdiff
