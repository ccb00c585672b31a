// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "resdiff/nn/layers.hpp"
#include "resdiff/tensor.hpp"

namespace resdiff {

// What the network is trained to predict.
enum class Objective { X0, Epsilon };

std::string objective_name(Objective o);
Objective parse_objective(const std::string& name);

struct DenoiserConfig {
  int target_channels = 7;     // 5 fluorescence + 2 boundary
  int condition_channels = 1;  // brightfield
  int base_width = 32;
  int num_levels = 3;
  int blocks_per_level = 2;
  int time_embed_dim = 128;
  bool attention = true;  // self-attention block at the bottleneck
  int max_groups = 8;     // group normalization
  Objective objective = Objective::X0;

  int in_channels() const { return target_channels + condition_channels; }
  int out_channels() const { return target_channels; }
  int width_at(int level) const { return base_width << level; }
  // Spatial sizes must be divisible by this.
  int size_multiple() const { return 1 << (num_levels - 1); }

  void validate() const;
  std::string to_json() const;
  static DenoiserConfig from_json(const std::string& text);
  bool operator==(const DenoiserConfig&) const = default;
};

struct ParamEntry {
  std::string name;
  std::size_t offset = 0;
  std::size_t count = 0;
  std::size_t fan_in = 0;  // 0 marks normalization gains/offsets
  bool is_gain = false;    // initialized to 1
};

struct UNetLayout;

// Learnable parameters: one flat float array addressed by named entries.
// The entry list is a pure function of the config.
struct DenoiserParams {
  DenoiserConfig config;
  std::vector<ParamEntry> entries;
  std::vector<float> values;

  std::size_t count() const { return values.size(); }
  const ParamEntry* find(const std::string& name) const;
  bool all_finite() const;
};

// Parameter count implied by a config, without allocating.
std::size_t parameter_count(const DenoiserConfig& cfg);

// Deterministic initialization from a seed.
DenoiserParams init_params(const DenoiserConfig& cfg, std::uint64_t seed);

// Intermediate values of one forward pass, needed by backward.
template <class T>
struct ResBlockTrace {
  nn::Feature<T> x;
  nn::NormCache<T> n1;
  nn::Feature<T> n1_out;
  nn::Feature<T> a1;
  nn::NormCache<T> n2;
  nn::Feature<T> n2_out;
  std::vector<T> mod;  // [scale(C), shift(C)]
  nn::Feature<T> m;
  nn::Feature<T> a2;
};

template <class T>
struct AttnTrace {
  nn::NormCache<T> norm;
  nn::Feature<T> hn;
  nn::Feature<T> qkv;
  nn::AttentionCache<T> attn;
  nn::Feature<T> o;
};

template <class T>
struct Trace {
  nn::Feature<T> input;
  std::vector<T> emb0, e1, e1a, temb, temb_act;
  std::vector<std::vector<ResBlockTrace<T>>> enc;
  std::vector<nn::Feature<T>> down_in;
  ResBlockTrace<T> mid1, mid2;
  AttnTrace<T> attn;
  std::vector<std::vector<ResBlockTrace<T>>> dec;
  std::vector<int> dec_skip_channels;  // channels of the running feature before concat
  std::vector<nn::Feature<T>> up_in;  // upsampled feature fed to up conv
  nn::NormCache<T> out_norm;
  nn::Feature<T> out_norm_out;
  nn::Feature<T> out_act;
};

// x0- or eps-predicting UNet f(x_t, y0, t) in scalar type T. Stateless apart
// from the layout; safe to share between threads.
template <class T>
class Denoiser {
 public:
  explicit Denoiser(const DenoiserConfig& cfg);
  ~Denoiser();
  Denoiser(Denoiser&&) noexcept;
  Denoiser& operator=(Denoiser&&) noexcept;

  const DenoiserConfig& config() const;
  std::size_t parameter_count() const;
  const std::vector<ParamEntry>& entries() const;

  // `input` is the channel concatenation of x_t and y0. When `trace` is
  // non-null it is filled for a later backward().
  nn::Feature<T> forward(const T* params, const nn::Feature<T>& input, int t,
                         Trace<T>* trace = nullptr) const;

  // Accumulates dLoss/dparams into `grads` given dLoss/doutput.
  void backward(const T* params, const Trace<T>& trace, const nn::Feature<T>& d_output,
                T* grads) const;

 private:
  std::unique_ptr<UNetLayout> layout_;
};

// Image-tensor convenience wrapper around Denoiser<float>.
ImageTensor predict(const Denoiser<float>& net, const DenoiserParams& params, const ImageTensor& x_t,
                    const ImageTensor& y0, int t);

template <class T>
nn::Feature<T> to_feature(const ImageTensor& a);
template <class T>
nn::Feature<T> to_feature(const ImageTensor& a, const ImageTensor& b);
ImageTensor to_image(const nn::Feature<float>& f, ValueRange range);

}  // namespace resdiff
