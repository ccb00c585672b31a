// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

// Building blocks of the denoiser with hand-written backward passes. Every
// function operates on one sample (C x H x W); batching is done by the
// caller. Backward functions *accumulate* into parameter gradients and
// *overwrite* input gradients.

namespace resdiff::nn {

template <class T>
struct Feature {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Feature() = default;
  Feature(int c, int h, int w) : channels(c), height(h), width(w), data(std::size_t(c) * h * w) {}

  std::size_t plane() const { return std::size_t(height) * width; }
  std::size_t size() const { return data.size(); }
  T* channel(int c) { return data.data() + std::size_t(c) * plane(); }
  const T* channel(int c) const { return data.data() + std::size_t(c) * plane(); }
};

template <class T>
Feature<T> concat(const Feature<T>& a, const Feature<T>& b);
// Splits a gradient of concat(a, b) back into the two parts.
template <class T>
void split(const Feature<T>& d, int first_channels, Feature<T>& da, Feature<T>& db);

// Per-thread scratch memory reused across layers.
template <class T>
struct Workspace {
  std::vector<T> col;
  std::vector<T> col_grad;
  std::vector<T> transposed;
};

// k x k convolution, zero padding k/2, given stride. Weight is
// [out][in][k][k], bias [out].
struct ConvShape {
  int in = 0;
  int out = 0;
  int kernel = 3;
  int stride = 1;
  std::size_t weight_count() const { return std::size_t(out) * in * kernel * kernel; }
  int out_extent(int extent) const { return (extent + 2 * (kernel / 2) - kernel) / stride + 1; }
};

template <class T>
void conv2d_forward(const ConvShape& s, const T* weight, const T* bias, const Feature<T>& x,
                    Feature<T>& y, Workspace<T>& ws);
// dx may be null when the input gradient is not needed.
template <class T>
void conv2d_backward(const ConvShape& s, const T* weight, const Feature<T>& x, const Feature<T>& dy,
                     T* dweight, T* dbias, Feature<T>* dx, Workspace<T>& ws);

// Group normalization over (C/G) x H x W slabs with per-channel affine.
template <class T>
struct NormCache {
  std::vector<T> xhat;
  std::vector<T> inv_std;  // per group
};

inline constexpr double kNormEpsilon = 1e-5;

// Largest divisor of `channels` not exceeding `max_groups`.
int group_count(int channels, int max_groups);

template <class T>
void group_norm_forward(int groups, const T* gamma, const T* beta, const Feature<T>& x,
                        Feature<T>& y, NormCache<T>& cache);
template <class T>
void group_norm_backward(int groups, const T* gamma, const NormCache<T>& cache,
                         const Feature<T>& dy, T* dgamma, T* dbeta, Feature<T>& dx);

// x * sigmoid(x)
template <class T>
void silu_forward(const std::vector<T>& x, std::vector<T>& y);
template <class T>
void silu_backward(const std::vector<T>& x, const std::vector<T>& dy, std::vector<T>& dx);

// y = W x + b with W [out][in].
template <class T>
void linear_forward(int in, int out, const T* weight, const T* bias, const std::vector<T>& x,
                    std::vector<T>& y);
template <class T>
void linear_backward(int in, int out, const T* weight, const std::vector<T>& x,
                     const std::vector<T>& dy, T* dweight, T* dbias, std::vector<T>* dx);

// y = x * (1 + scale[c]) + shift[c]
template <class T>
void modulate_forward(const Feature<T>& x, const T* scale, const T* shift, Feature<T>& y);
template <class T>
void modulate_backward(const Feature<T>& x, const T* scale, const Feature<T>& dy, T* dscale,
                       T* dshift, Feature<T>& dx);

// Nearest-neighbour 2x upsampling.
template <class T>
void upsample2x_forward(const Feature<T>& x, Feature<T>& y);
template <class T>
void upsample2x_backward(const Feature<T>& dy, Feature<T>& dx);

// Single-head softmax attention over the H*W positions. qkv holds q, k, v
// stacked along channels ([3C][N]); output o is [C][N]:
//   P = softmax_rows(q^T k / sqrt(C)),  o = v P^T.
template <class T>
struct AttentionCache {
  std::vector<T> probs;  // [N][N]
};

template <class T>
void attention_forward(int channels, const Feature<T>& qkv, Feature<T>& o, AttentionCache<T>& cache,
                       Workspace<T>& ws);
template <class T>
void attention_backward(int channels, const Feature<T>& qkv, const AttentionCache<T>& cache,
                        const Feature<T>& d_o, Feature<T>& dqkv, Workspace<T>& ws);

// Sinusoidal embedding of an integer step: [sin(t f_i), cos(t f_i)] with
// f_i = 10000^(-i / (dim/2)).
template <class T>
std::vector<T> timestep_embedding(int t, int dim);

}  // namespace resdiff::nn
