// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "resdiff/kernels.hpp"
#include "resdiff/model.hpp"
#include "resdiff/rng.hpp"
#include "test_util.hpp"

using namespace resdiff;

namespace {

// Independent closed-form parameter count (mirrors
// tests/oracles/param_count_oracle.py, not the layout code).
std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) {
  return out * in * k * k + out;
}
std::size_t linear_params(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t resblock_params(std::size_t in, std::size_t out, std::size_t d) {
  std::size_t n = 2 * in + conv_params(in, out, 3) + linear_params(d, 2 * out) + 2 * out +
                  conv_params(out, out, 3);
  if (in != out) n += conv_params(in, out, 1);
  return n;
}
std::size_t oracle_count(const DenoiserConfig& c) {
  const std::size_t d = std::size_t(c.time_embed_dim);
  std::vector<std::size_t> w;
  for (int l = 0; l < c.num_levels; ++l) w.push_back(std::size_t(c.base_width) << l);
  std::size_t n = 2 * linear_params(d, d) + conv_params(std::size_t(c.in_channels()), w[0], 3);
  std::size_t prev = w[0];
  for (int l = 0; l < c.num_levels; ++l) {
    for (int b = 0; b < c.blocks_per_level; ++b) {
      n += resblock_params(prev, w[std::size_t(l)], d);
      prev = w[std::size_t(l)];
    }
    if (l + 1 < c.num_levels) n += conv_params(w[std::size_t(l)], w[std::size_t(l)], 3);
  }
  const std::size_t wb = w.back();
  n += 2 * resblock_params(wb, wb, d);
  if (c.attention) n += 2 * wb + conv_params(wb, 3 * wb, 1) + conv_params(wb, wb, 1);
  for (int l = c.num_levels - 1; l >= 0; --l) {
    const std::size_t wl = w[std::size_t(l)];
    for (int b = 0; b < c.blocks_per_level; ++b) n += resblock_params(b == 0 ? 2 * wl : wl, wl, d);
    if (l > 0) n += conv_params(wl, w[std::size_t(l - 1)], 3);
  }
  n += 2 * w[0] + conv_params(w[0], std::size_t(c.out_channels()), 3);
  return n;
}

DenoiserConfig tiny_config() {
  DenoiserConfig c;
  c.target_channels = 2;
  c.condition_channels = 1;
  c.base_width = 4;
  c.num_levels = 2;
  c.blocks_per_level = 1;
  c.time_embed_dim = 8;
  c.attention = true;
  c.max_groups = 2;
  return c;
}

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.base_width = 8;
  c.num_levels = 3;
  c.blocks_per_level = 1;
  c.time_embed_dim = 16;
  return c;
}

template <class T>
nn::Feature<T> random_input(int c, int h, int w, std::uint64_t seed) {
  nn::Feature<T> f(c, h, w);
  RngState rng(seed);
  for (T& v : f.data) v = static_cast<T>(2.0 * rng.uniform() - 1.0);
  return f;
}

class IsaGuard {
 public:
  IsaGuard() : saved_(kernels::active_isa()) {}
  ~IsaGuard() { kernels::set_isa(saved_); }

 private:
  kernels::Isa saved_;
};

}  // namespace

TEST_CASE("parameter count matches the closed-form oracle") {
  // Frozen from tests/oracles/param_count_oracle.py.
  DenoiserConfig def;
  CHECK(parameter_count(def) == 2839719);
  DenoiserConfig mid;
  mid.base_width = 16;
  mid.time_embed_dim = 64;
  CHECK(parameter_count(mid) == 713815);
  DenoiserConfig baseline = mid;
  baseline.condition_channels = 7;
  CHECK(parameter_count(baseline) == 714679);
  DenoiserConfig no_attn = tiny_config();
  no_attn.target_channels = 7;
  no_attn.attention = false;
  no_attn.max_groups = 8;
  CHECK(parameter_count(no_attn) == 7947);

  for (int levels = 1; levels <= 4; ++levels)
    for (int blocks = 1; blocks <= 3; ++blocks)
      for (bool attn : {false, true}) {
        DenoiserConfig c;
        c.base_width = 4;
        c.num_levels = levels;
        c.blocks_per_level = blocks;
        c.time_embed_dim = 6;
        c.attention = attn;
        CAPTURE(levels);
        CAPTURE(blocks);
        CHECK(parameter_count(c) == oracle_count(c));
      }
}

TEST_CASE("parameter entries tile the flat array") {
  const DenoiserParams p = init_params(small_config(), 1);
  CHECK(p.count() == parameter_count(small_config()));
  std::size_t offset = 0;
  for (const ParamEntry& e : p.entries) {
    CHECK(e.offset == offset);
    offset += e.count;
  }
  CHECK(offset == p.count());
  CHECK(p.find("conv_in.weight") != nullptr);
  CHECK(p.find("mid.attn.qkv.weight") != nullptr);
  CHECK(p.find("no.such.entry") == nullptr);
  CHECK(p.all_finite());
}

TEST_CASE("initialization is deterministic in the seed") {
  const auto a = init_params(small_config(), 42);
  const auto b = init_params(small_config(), 42);
  const auto c = init_params(small_config(), 43);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  for (const ParamEntry& e : a.entries) {
    if (!e.is_gain) continue;
    for (std::size_t i = 0; i < e.count; ++i) CHECK(a.values[e.offset + i] == 1.0f);
  }
}

TEST_CASE("config JSON round trip and validation") {
  DenoiserConfig c = small_config();
  c.objective = Objective::Epsilon;
  c.condition_channels = 8;
  c.attention = false;
  CHECK(DenoiserConfig::from_json(c.to_json()) == c);

  DenoiserConfig bad = c;
  bad.time_embed_dim = 7;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.num_levels = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.base_width = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  std::string text = c.to_json();
  const auto pos = text.find("\"in_channels\":15");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 16, "\"in_channels\":14");
  CHECK_THROWS_AS(DenoiserConfig::from_json(text), std::invalid_argument);
  CHECK(parse_objective("eps") == Objective::Epsilon);
  CHECK_THROWS_AS(parse_objective("v"), std::invalid_argument);
}

TEST_CASE("forward: shapes, determinism and step dependence") {
  const DenoiserConfig cfg = small_config();
  const Denoiser<float> net(cfg);
  const DenoiserParams p = init_params(cfg, 3);
  const auto in = random_input<float>(cfg.in_channels(), 16, 16, 9);
  const auto y1 = net.forward(p.values.data(), in, 1);
  CHECK(y1.channels == cfg.out_channels());
  CHECK(y1.height == 16);
  CHECK(y1.width == 16);
  CHECK(net.forward(p.values.data(), in, 1).data == y1.data);
  CHECK(net.forward(p.values.data(), in, 10).data != y1.data);

  const auto rect = random_input<float>(cfg.in_channels(), 8, 12, 9);
  CHECK(net.forward(p.values.data(), rect, 2).width == 12);

  CHECK_THROWS_AS(net.forward(p.values.data(), random_input<float>(3, 16, 16, 1), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(net.forward(p.values.data(), random_input<float>(8, 10, 16, 1), 1),
                  std::invalid_argument);
}

TEST_CASE("predict wraps forward and checks the architecture") {
  const DenoiserConfig cfg = small_config();
  const Denoiser<float> net(cfg);
  const DenoiserParams p = init_params(cfg, 3);
  const ImageTensor xt = testutil::random_tensor(7, 8, 8, 1);
  const ImageTensor y0 = testutil::random_tensor(1, 8, 8, 2);
  const ImageTensor out = predict(net, p, xt, y0, 4);
  CHECK(out.channels() == 7);
  CHECK(out.range() == kSignedRange);
  const auto ref = net.forward(p.values.data(), to_feature<float>(xt, y0), 4);
  CHECK(std::equal(ref.data.begin(), ref.data.end(), out.data().begin()));
  DenoiserConfig other = cfg;
  other.base_width = 4;
  CHECK_THROWS_AS(predict(net, init_params(other, 1), xt, y0, 4), std::invalid_argument);
  CHECK_THROWS_AS(predict(net, p, xt, testutil::random_tensor(1, 4, 8, 2), 4),
                  std::invalid_argument);
}

TEST_CASE("float and double forward agree") {
  const DenoiserConfig cfg = small_config();
  const Denoiser<float> nf(cfg);
  const Denoiser<double> nd(cfg);
  const DenoiserParams p = init_params(cfg, 5);
  const std::vector<double> pd(p.values.begin(), p.values.end());
  const auto inf = random_input<float>(cfg.in_channels(), 16, 16, 4);
  const auto ind = random_input<double>(cfg.in_channels(), 16, 16, 4);
  const auto yf = nf.forward(p.values.data(), inf, 7);
  const auto yd = nd.forward(pd.data(), ind, 7);
  double worst = 0.0;
  for (std::size_t i = 0; i < yf.size(); ++i)
    worst = std::max(worst, std::abs(double(yf.data[i]) - yd.data[i]));
  CHECK(worst < 1e-4);
}

TEST_CASE("scalar and AVX2 kernels give the same model output") {
  if (kernels::detect_isa() != kernels::Isa::Avx2) {
    MESSAGE("AVX2 not available; skipping");
    return;
  }
  IsaGuard guard;
  const DenoiserConfig cfg = small_config();
  const Denoiser<float> net(cfg);
  const DenoiserParams p = init_params(cfg, 6);
  const auto in = random_input<float>(cfg.in_channels(), 16, 16, 8);

  kernels::set_isa(kernels::Isa::Scalar);
  nn::Feature<float> dy(cfg.out_channels(), 16, 16);
  dy.data.assign(dy.size(), 0.01f);
  Trace<float> ts;
  const auto ys = net.forward(p.values.data(), in, 3, &ts);
  std::vector<float> gs(p.count(), 0.0f);
  net.backward(p.values.data(), ts, dy, gs.data());

  REQUIRE(kernels::set_isa(kernels::Isa::Avx2) == kernels::Isa::Avx2);
  Trace<float> tv;
  const auto yv = net.forward(p.values.data(), in, 3, &tv);
  std::vector<float> gv(p.count(), 0.0f);
  net.backward(p.values.data(), tv, dy, gv.data());

  double worst = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i)
    worst = std::max(worst, double(std::abs(ys.data[i] - yv.data[i])));
  CHECK(worst < 1e-4);
  double gmax = 0.0, gdiff = 0.0;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    gmax = std::max(gmax, double(std::abs(gs[i])));
    gdiff = std::max(gdiff, double(std::abs(gs[i] - gv[i])));
  }
  CHECK(gdiff <= 1e-3 * gmax);
}

TEST_CASE("full model gradient matches finite differences") {
  for (bool attention : {true, false}) {
    CAPTURE(attention);
    DenoiserConfig cfg = tiny_config();
    cfg.attention = attention;
    const Denoiser<double> net(cfg);
    const DenoiserParams p = init_params(cfg, 11);
    std::vector<double> theta(p.values.begin(), p.values.end());
    // Non-trivial gains and offsets so normalization paths are exercised.
    RngState rng(12);
    for (const ParamEntry& e : p.entries)
      if (e.fan_in == 0)
        for (std::size_t i = 0; i < e.count; ++i) theta[e.offset + i] += 0.3 * rng.normal();
    const auto in = random_input<double>(cfg.in_channels(), 8, 8, 13);
    nn::Feature<double> w(cfg.out_channels(), 8, 8);
    for (double& v : w.data) v = rng.normal();
    const int t = 5;

    auto objective = [&](const std::vector<double>& th) {
      const auto y = net.forward(th.data(), in, t);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += w.data[i] * y.data[i];
      return s;
    };
    Trace<double> trace;
    net.forward(theta.data(), in, t, &trace);
    std::vector<double> grad(theta.size(), 0.0);
    net.backward(theta.data(), trace, w, grad.data());

    // Every entry gets at least one sample, the rest at random.
    std::vector<std::size_t> idx;
    for (const ParamEntry& e : p.entries) idx.push_back(e.offset + e.count / 2);
    for (int i = 0; i < 300; ++i)
      idx.push_back(std::size_t(rng.uniform_int(0, std::int64_t(theta.size()) - 1)));

    const double h = 1e-5;
    int good = 0;
    for (std::size_t i : idx) {
      std::vector<double> th = theta;
      th[i] = theta[i] + h;
      const double up = objective(th);
      th[i] = theta[i] - h;
      const double down = objective(th);
      const double fd = (up - down) / (2 * h);
      const double err = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
      if (err <= 1e-3) ++good;
    }
    const double frac = double(good) / double(idx.size());
    CAPTURE(frac);
    CHECK(frac >= 0.99);
  }
}

TEST_CASE("backward accumulates into the gradient buffer") {
  const DenoiserConfig cfg = tiny_config();
  const Denoiser<double> net(cfg);
  const DenoiserParams p = init_params(cfg, 2);
  const std::vector<double> theta(p.values.begin(), p.values.end());
  const auto in = random_input<double>(cfg.in_channels(), 8, 8, 3);
  Trace<double> trace;
  net.forward(theta.data(), in, 2, &trace);
  nn::Feature<double> dy(cfg.out_channels(), 8, 8);
  dy.data.assign(dy.size(), 1.0);
  std::vector<double> once(theta.size(), 0.0), twice(theta.size(), 0.0);
  net.backward(theta.data(), trace, dy, once.data());
  net.backward(theta.data(), trace, dy, twice.data());
  net.backward(theta.data(), trace, dy, twice.data());
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(twice[i] == doctest::Approx(2 * once[i]).epsilon(1e-9));
}
