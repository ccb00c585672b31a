// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "resdiff/kernels.hpp"

namespace resdiff::nn {

template <class T>
Feature<T> concat(const Feature<T>& a, const Feature<T>& b) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument("concat: spatial sizes differ");
  Feature<T> out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

template <class T>
void split(const Feature<T>& d, int first_channels, Feature<T>& da, Feature<T>& db) {
  da = Feature<T>(first_channels, d.height, d.width);
  db = Feature<T>(d.channels - first_channels, d.height, d.width);
  const auto cut = d.data.begin() + static_cast<std::ptrdiff_t>(da.size());
  std::copy(d.data.begin(), cut, da.data.begin());
  std::copy(cut, d.data.end(), db.data.begin());
}

namespace {

// Range of output columns whose input column ox*stride - pad + offset is
// inside [0, extent).
struct ValidSpan {
  int lo;
  int hi;
};

ValidSpan valid_outputs(int extent, int out_extent, int stride, int shift) {
  // need 0 <= o*stride + shift < extent
  int lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  int hi = (extent - 1 - shift) >= 0 ? (extent - 1 - shift) / stride + 1 : 0;
  lo = std::min(lo, out_extent);
  hi = std::clamp(hi, lo, out_extent);
  return {lo, hi};
}

template <class T>
void im2col(const ConvShape& s, const Feature<T>& x, int ho, int wo, std::vector<T>& col) {
  const int k = s.kernel;
  const int pad = k / 2;
  const std::size_t n = std::size_t(ho) * wo;
  col.assign(std::size_t(s.in) * k * k * n, T(0));
  for (int ci = 0; ci < s.in; ++ci) {
    const T* src = x.channel(ci);
    for (int ky = 0; ky < k; ++ky) {
      const ValidSpan rows = valid_outputs(x.height, ho, s.stride, ky - pad);
      for (int kx = 0; kx < k; ++kx) {
        const ValidSpan cols = valid_outputs(x.width, wo, s.stride, kx - pad);
        T* dst = col.data() + (std::size_t(ci * k + ky) * k + kx) * n;
        for (int oy = rows.lo; oy < rows.hi; ++oy) {
          const T* srow = src + std::size_t(oy * s.stride + ky - pad) * x.width;
          T* drow = dst + std::size_t(oy) * wo;
          if (s.stride == 1) {
            std::copy(srow + cols.lo + kx - pad, srow + cols.hi + kx - pad, drow + cols.lo);
          } else {
            for (int ox = cols.lo; ox < cols.hi; ++ox) drow[ox] = srow[ox * s.stride + kx - pad];
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const ConvShape& s, const std::vector<T>& col, int ho, int wo, Feature<T>& dx) {
  const int k = s.kernel;
  const int pad = k / 2;
  const std::size_t n = std::size_t(ho) * wo;
  std::fill(dx.data.begin(), dx.data.end(), T(0));
  for (int ci = 0; ci < s.in; ++ci) {
    T* dst = dx.channel(ci);
    for (int ky = 0; ky < k; ++ky) {
      const ValidSpan rows = valid_outputs(dx.height, ho, s.stride, ky - pad);
      for (int kx = 0; kx < k; ++kx) {
        const ValidSpan cols = valid_outputs(dx.width, wo, s.stride, kx - pad);
        const T* src = col.data() + (std::size_t(ci * k + ky) * k + kx) * n;
        for (int oy = rows.lo; oy < rows.hi; ++oy) {
          T* drow = dst + std::size_t(oy * s.stride + ky - pad) * dx.width;
          const T* srow = src + std::size_t(oy) * wo;
          for (int ox = cols.lo; ox < cols.hi; ++ox) drow[ox * s.stride + kx - pad] += srow[ox];
        }
      }
    }
  }
}

bool is_pointwise(const ConvShape& s) { return s.kernel == 1 && s.stride == 1; }

}  // namespace

template <class T>
void conv2d_forward(const ConvShape& s, const T* weight, const T* bias, const Feature<T>& x,
                    Feature<T>& y, Workspace<T>& ws) {
  if (x.channels != s.in) throw std::invalid_argument("conv2d: input channel mismatch");
  const int ho = s.out_extent(x.height);
  const int wo = s.out_extent(x.width);
  const std::size_t n = std::size_t(ho) * wo;
  const std::size_t kk = std::size_t(s.in) * s.kernel * s.kernel;
  y = Feature<T>(s.out, ho, wo);
  for (int o = 0; o < s.out; ++o) std::fill_n(y.channel(o), n, bias[o]);
  const T* cols = x.data.data();
  if (!is_pointwise(s)) {
    im2col(s, x, ho, wo, ws.col);
    cols = ws.col.data();
  }
  kernels::gemm(s.out, n, kk, weight, kk, cols, n, y.data.data(), n);
}

template <class T>
void conv2d_backward(const ConvShape& s, const T* weight, const Feature<T>& x, const Feature<T>& dy,
                     T* dweight, T* dbias, Feature<T>* dx, Workspace<T>& ws) {
  const int ho = dy.height;
  const int wo = dy.width;
  const std::size_t n = std::size_t(ho) * wo;
  const std::size_t kk = std::size_t(s.in) * s.kernel * s.kernel;

  for (int o = 0; o < s.out; ++o) {
    const T* d = dy.channel(o);
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += d[i];
    dbias[o] += acc;
  }

  const T* cols = x.data.data();
  if (!is_pointwise(s)) {
    im2col(s, x, ho, wo, ws.col);
    cols = ws.col.data();
  }
  // dW[out, kk] += dy[out, n] * cols^T[n, kk]
  ws.transposed.resize(n * kk);
  kernels::transpose(kk, n, cols, n, ws.transposed.data(), kk);
  kernels::gemm(s.out, kk, n, dy.data.data(), n, ws.transposed.data(), kk, dweight, kk);

  if (dx == nullptr) return;
  // dcols[kk, n] = W^T[kk, out] * dy[out, n]
  ws.transposed.resize(kk * s.out);
  kernels::transpose(s.out, kk, weight, kk, ws.transposed.data(), std::size_t(s.out));
  *dx = Feature<T>(s.in, x.height, x.width);
  if (is_pointwise(s)) {
    kernels::gemm(kk, n, s.out, ws.transposed.data(), s.out, dy.data.data(), n, dx->data.data(), n);
    return;
  }
  ws.col_grad.assign(kk * n, T(0));
  kernels::gemm(kk, n, s.out, ws.transposed.data(), s.out, dy.data.data(), n, ws.col_grad.data(), n);
  col2im(s, ws.col_grad, ho, wo, *dx);
}

int group_count(int channels, int max_groups) {
  for (int g = std::min(channels, max_groups); g > 1; --g)
    if (channels % g == 0) return g;
  return 1;
}

template <class T>
void group_norm_forward(int groups, const T* gamma, const T* beta, const Feature<T>& x,
                        Feature<T>& y, NormCache<T>& cache) {
  const int per_group = x.channels / groups;
  const std::size_t plane = x.plane();
  const std::size_t count = std::size_t(per_group) * plane;
  y = Feature<T>(x.channels, x.height, x.width);
  cache.xhat.resize(x.size());
  cache.inv_std.resize(std::size_t(groups));
  for (int g = 0; g < groups; ++g) {
    const std::size_t base = std::size_t(g) * count;
    double mean = 0;
    for (std::size_t i = 0; i < count; ++i) mean += x.data[base + i];
    mean /= double(count);
    double var = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const double d = x.data[base + i] - mean;
      var += d * d;
    }
    var /= double(count);
    const T inv = static_cast<T>(1.0 / std::sqrt(var + kNormEpsilon));
    cache.inv_std[g] = inv;
    const T m = static_cast<T>(mean);
    for (int cl = 0; cl < per_group; ++cl) {
      const int c = g * per_group + cl;
      const std::size_t off = std::size_t(c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T xh = (x.data[off + i] - m) * inv;
        cache.xhat[off + i] = xh;
        y.data[off + i] = xh * gamma[c] + beta[c];
      }
    }
  }
}

template <class T>
void group_norm_backward(int groups, const T* gamma, const NormCache<T>& cache,
                         const Feature<T>& dy, T* dgamma, T* dbeta, Feature<T>& dx) {
  const int per_group = dy.channels / groups;
  const std::size_t plane = dy.plane();
  const std::size_t count = std::size_t(per_group) * plane;
  dx = Feature<T>(dy.channels, dy.height, dy.width);
  for (int g = 0; g < groups; ++g) {
    T sum_dxh = 0;
    T sum_dxh_xh = 0;
    for (int cl = 0; cl < per_group; ++cl) {
      const int c = g * per_group + cl;
      const std::size_t off = std::size_t(c) * plane;
      T dg = 0, db = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        const T d = dy.data[off + i];
        const T xh = cache.xhat[off + i];
        dg += d * xh;
        db += d;
      }
      dgamma[c] += dg;
      dbeta[c] += db;
      sum_dxh += db * gamma[c];
      sum_dxh_xh += dg * gamma[c];
    }
    const T inv = cache.inv_std[g];
    const T scale = inv / static_cast<T>(count);
    const T n = static_cast<T>(count);
    for (int cl = 0; cl < per_group; ++cl) {
      const int c = g * per_group + cl;
      const std::size_t off = std::size_t(c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T dxh = dy.data[off + i] * gamma[c];
        dx.data[off + i] = scale * (n * dxh - sum_dxh - cache.xhat[off + i] * sum_dxh_xh);
      }
    }
  }
}

template <class T>
void silu_forward(const std::vector<T>& x, std::vector<T>& y) {
  y.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / (T(1) + std::exp(-x[i]));
}

template <class T>
void silu_backward(const std::vector<T>& x, const std::vector<T>& dy, std::vector<T>& dx) {
  dx.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T sig = T(1) / (T(1) + std::exp(-x[i]));
    dx[i] = dy[i] * sig * (T(1) + x[i] * (T(1) - sig));
  }
}

template <class T>
void linear_forward(int in, int out, const T* weight, const T* bias, const std::vector<T>& x,
                    std::vector<T>& y) {
  y.assign(std::size_t(out), T(0));
  for (int o = 0; o < out; ++o) y[o] = bias[o] + kernels::dot(std::size_t(in), weight + std::size_t(o) * in, x.data());
}

template <class T>
void linear_backward(int in, int out, const T* weight, const std::vector<T>& x,
                     const std::vector<T>& dy, T* dweight, T* dbias, std::vector<T>* dx) {
  for (int o = 0; o < out; ++o) {
    dbias[o] += dy[o];
    kernels::axpy(std::size_t(in), dy[o], x.data(), dweight + std::size_t(o) * in);
  }
  if (dx == nullptr) return;
  dx->assign(std::size_t(in), T(0));
  for (int o = 0; o < out; ++o)
    kernels::axpy(std::size_t(in), dy[o], weight + std::size_t(o) * in, dx->data());
}

template <class T>
void modulate_forward(const Feature<T>& x, const T* scale, const T* shift, Feature<T>& y) {
  y = Feature<T>(x.channels, x.height, x.width);
  const std::size_t plane = x.plane();
  for (int c = 0; c < x.channels; ++c) {
    const T a = T(1) + scale[c];
    const T b = shift[c];
    const T* s = x.channel(c);
    T* d = y.channel(c);
    for (std::size_t i = 0; i < plane; ++i) d[i] = s[i] * a + b;
  }
}

template <class T>
void modulate_backward(const Feature<T>& x, const T* scale, const Feature<T>& dy, T* dscale,
                       T* dshift, Feature<T>& dx) {
  dx = Feature<T>(x.channels, x.height, x.width);
  const std::size_t plane = x.plane();
  for (int c = 0; c < x.channels; ++c) {
    const T a = T(1) + scale[c];
    const T* s = x.channel(c);
    const T* g = dy.channel(c);
    T* d = dx.channel(c);
    T ds = 0, db = 0;
    for (std::size_t i = 0; i < plane; ++i) {
      ds += g[i] * s[i];
      db += g[i];
      d[i] = g[i] * a;
    }
    dscale[c] += ds;
    dshift[c] += db;
  }
}

template <class T>
void upsample2x_forward(const Feature<T>& x, Feature<T>& y) {
  y = Feature<T>(x.channels, x.height * 2, x.width * 2);
  for (int c = 0; c < x.channels; ++c) {
    const T* s = x.channel(c);
    T* d = y.channel(c);
    for (int yy = 0; yy < y.height; ++yy)
      for (int xx = 0; xx < y.width; ++xx)
        d[std::size_t(yy) * y.width + xx] = s[std::size_t(yy / 2) * x.width + xx / 2];
  }
}

template <class T>
void upsample2x_backward(const Feature<T>& dy, Feature<T>& dx) {
  dx = Feature<T>(dy.channels, dy.height / 2, dy.width / 2);
  for (int c = 0; c < dy.channels; ++c) {
    const T* s = dy.channel(c);
    T* d = dx.channel(c);
    for (int yy = 0; yy < dy.height; ++yy)
      for (int xx = 0; xx < dy.width; ++xx)
        d[std::size_t(yy / 2) * dx.width + xx / 2] += s[std::size_t(yy) * dy.width + xx];
  }
}

template <class T>
void attention_forward(int channels, const Feature<T>& qkv, Feature<T>& o, AttentionCache<T>& cache,
                       Workspace<T>& ws) {
  const std::size_t c = std::size_t(channels);
  const std::size_t n = qkv.plane();
  const T* q = qkv.data.data();
  const T* k = q + c * n;
  const T* v = k + c * n;
  const T scale = T(1) / std::sqrt(static_cast<T>(channels));

  // S = q^T k
  ws.transposed.resize(n * c);
  kernels::transpose(c, n, q, n, ws.transposed.data(), c);
  cache.probs.assign(n * n, T(0));
  kernels::gemm(n, n, c, ws.transposed.data(), c, k, n, cache.probs.data(), n);
  for (std::size_t i = 0; i < n; ++i) {
    T* row = cache.probs.data() + i * n;
    T mx = row[0] * scale;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] *= scale;
      mx = std::max(mx, row[j]);
    }
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    const T inv = T(1) / sum;
    for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
  }
  // o = v P^T
  ws.transposed.resize(n * n);
  kernels::transpose(n, n, cache.probs.data(), n, ws.transposed.data(), n);
  o = Feature<T>(channels, qkv.height, qkv.width);
  kernels::gemm(c, n, n, v, n, ws.transposed.data(), n, o.data.data(), n);
}

template <class T>
void attention_backward(int channels, const Feature<T>& qkv, const AttentionCache<T>& cache,
                        const Feature<T>& d_o, Feature<T>& dqkv, Workspace<T>& ws) {
  const std::size_t c = std::size_t(channels);
  const std::size_t n = qkv.plane();
  const T* q = qkv.data.data();
  const T* k = q + c * n;
  const T* v = k + c * n;
  const T* p = cache.probs.data();
  const T scale = T(1) / std::sqrt(static_cast<T>(channels));

  dqkv = Feature<T>(3 * channels, qkv.height, qkv.width);
  T* dq = dqkv.data.data();
  T* dk = dq + c * n;
  T* dv = dk + c * n;

  // dv = d_o P
  kernels::gemm(c, n, n, d_o.data.data(), n, p, n, dv, n);

  // dP = d_o^T v, then dS = P (dP - rowsum(P dP)) * scale
  std::vector<T> d_o_t(n * c);
  kernels::transpose(c, n, d_o.data.data(), n, d_o_t.data(), c);
  std::vector<T> ds(n * n, T(0));
  kernels::gemm(n, n, c, d_o_t.data(), c, v, n, ds.data(), n);
  for (std::size_t i = 0; i < n; ++i) {
    T* row = ds.data() + i * n;
    const T* prow = p + i * n;
    T dotp = 0;
    for (std::size_t j = 0; j < n; ++j) dotp += prow[j] * row[j];
    for (std::size_t j = 0; j < n; ++j) row[j] = prow[j] * (row[j] - dotp) * scale;
  }

  // dk = q dS ; dq = k dS^T
  kernels::gemm(c, n, n, q, n, ds.data(), n, dk, n);
  ws.transposed.resize(n * n);
  kernels::transpose(n, n, ds.data(), n, ws.transposed.data(), n);
  kernels::gemm(c, n, n, k, n, ws.transposed.data(), n, dq, n);
}

template <class T>
std::vector<T> timestep_embedding(int t, int dim) {
  std::vector<T> emb(std::size_t(dim), T(0));
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
    const double arg = double(t) * freq;
    emb[std::size_t(i)] = static_cast<T>(std::sin(arg));
    emb[std::size_t(i + half)] = static_cast<T>(std::cos(arg));
  }
  return emb;
}

#define RESDIFF_INSTANTIATE(T)                                                                    \
  template Feature<T> concat(const Feature<T>&, const Feature<T>&);                              \
  template void split(const Feature<T>&, int, Feature<T>&, Feature<T>&);                         \
  template void conv2d_forward(const ConvShape&, const T*, const T*, const Feature<T>&,          \
                               Feature<T>&, Workspace<T>&);                                      \
  template void conv2d_backward(const ConvShape&, const T*, const Feature<T>&, const Feature<T>&, \
                                T*, T*, Feature<T>*, Workspace<T>&);                             \
  template void group_norm_forward(int, const T*, const T*, const Feature<T>&, Feature<T>&,      \
                                   NormCache<T>&);                                               \
  template void group_norm_backward(int, const T*, const NormCache<T>&, const Feature<T>&, T*,   \
                                    T*, Feature<T>&);                                            \
  template void silu_forward(const std::vector<T>&, std::vector<T>&);                            \
  template void silu_backward(const std::vector<T>&, const std::vector<T>&, std::vector<T>&);    \
  template void linear_forward(int, int, const T*, const T*, const std::vector<T>&,              \
                               std::vector<T>&);                                                 \
  template void linear_backward(int, int, const T*, const std::vector<T>&, const std::vector<T>&, \
                                T*, T*, std::vector<T>*);                                        \
  template void modulate_forward(const Feature<T>&, const T*, const T*, Feature<T>&);            \
  template void modulate_backward(const Feature<T>&, const T*, const Feature<T>&, T*, T*,        \
                                  Feature<T>&);                                                  \
  template void upsample2x_forward(const Feature<T>&, Feature<T>&);                              \
  template void upsample2x_backward(const Feature<T>&, Feature<T>&);                             \
  template void attention_forward(int, const Feature<T>&, Feature<T>&, AttentionCache<T>&,       \
                                  Workspace<T>&);                                                \
  template void attention_backward(int, const Feature<T>&, const AttentionCache<T>&,             \
                                   const Feature<T>&, Feature<T>&, Workspace<T>&);               \
  template std::vector<T> timestep_embedding(int, int);

RESDIFF_INSTANTIATE(float)
RESDIFF_INSTANTIATE(double)

#undef RESDIFF_INSTANTIATE

}  // namespace resdiff::nn
