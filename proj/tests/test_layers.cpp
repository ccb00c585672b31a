// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference checks of every layer's backward pass, in
// double precision. Inputs and parameters are packed into one vector theta;
// the scalar objective is <w, f(theta)> for a fixed random w.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "resdiff/nn/layers.hpp"
#include "resdiff/rng.hpp"

using namespace resdiff;
using namespace resdiff::nn;

namespace {

using Vec = std::vector<double>;
using Forward = std::function<Vec(const Vec&)>;
// Returns d<w, f>/dtheta.
using Backward = std::function<Vec(const Vec&, const Vec&)>;

Vec random_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  RngState rng(seed);
  Vec v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

double max_rel_error(const Vec& theta, const Forward& f, const Backward& b, std::uint64_t seed) {
  const Vec y = f(theta);
  const Vec w = random_vec(y.size(), seed + 1);
  const Vec g = b(theta, w);
  REQUIRE(g.size() == theta.size());
  auto objective = [&](const Vec& th) {
    const Vec out = f(th);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += w[i] * out[i];
    return s;
  };
  const double h = 1e-6;
  double worst = 0.0;
  Vec th = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    th[i] = theta[i] + h;
    const double up = objective(th);
    th[i] = theta[i] - h;
    const double down = objective(th);
    th[i] = theta[i];
    const double fd = (up - down) / (2 * h);
    const double err = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-4});
    worst = std::max(worst, err);
  }
  return worst;
}

Feature<double> unpack(const Vec& theta, std::size_t offset, int c, int h, int w) {
  Feature<double> f(c, h, w);
  std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(offset), f.size(), f.data.begin());
  return f;
}

// Rounding in the difference quotient alone is around 1e-6 here.
constexpr double kTol = 1e-5;

void check_conv(int in, int out, int kernel, int stride, int h, int w) {
  const ConvShape s{in, out, kernel, stride};
  const std::size_t nx = std::size_t(in) * h * w;
  const std::size_t nw = s.weight_count();
  Vec theta = random_vec(nx + nw + std::size_t(out), 100 + kernel * 10 + stride);
  Forward f = [&](const Vec& th) {
    Feature<double> x = unpack(th, 0, in, h, w);
    Feature<double> y;
    Workspace<double> ws;
    conv2d_forward(s, th.data() + nx, th.data() + nx + nw, x, y, ws);
    return y.data;
  };
  Backward b = [&](const Vec& th, const Vec& wgt) {
    Feature<double> x = unpack(th, 0, in, h, w);
    Feature<double> dy(out, s.out_extent(h), s.out_extent(w));
    dy.data = wgt;
    Vec g(th.size(), 0.0);
    Feature<double> dx;
    Workspace<double> ws;
    conv2d_backward(s, th.data() + nx, x, dy, g.data() + nx, g.data() + nx + nw, &dx, ws);
    std::copy(dx.data.begin(), dx.data.end(), g.begin());
    return g;
  };
  CHECK(max_rel_error(theta, f, b, 7) < kTol);
}

}  // namespace

TEST_CASE("conv2d backward matches finite differences") {
  SUBCASE("3x3 stride 1") { check_conv(3, 4, 3, 1, 5, 6); }
  SUBCASE("3x3 stride 2, even size") { check_conv(2, 3, 3, 2, 6, 6); }
  SUBCASE("3x3 stride 2, odd size") { check_conv(2, 3, 3, 2, 5, 7); }
  SUBCASE("1x1") { check_conv(4, 5, 1, 1, 3, 4); }
}

TEST_CASE("conv2d output shape and bias") {
  const ConvShape s{1, 1, 3, 2};
  CHECK(s.out_extent(8) == 4);
  CHECK(s.out_extent(7) == 4);
  Feature<double> x(1, 4, 4);
  std::vector<double> weight(9, 0.0);
  const double bias = 0.25;
  Feature<double> y;
  Workspace<double> ws;
  conv2d_forward(s, weight.data(), &bias, x, y, ws);
  CHECK(y.channels == 1);
  CHECK(y.height == 2);
  CHECK(y.width == 2);
  for (double v : y.data) CHECK(v == 0.25);
}

TEST_CASE("conv2d zero padding: identity kernel reproduces the input") {
  const ConvShape s{1, 1, 3, 1};
  Feature<double> x(1, 3, 3);
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = double(i);
  std::vector<double> weight(9, 0.0);
  weight[4] = 1.0;
  const double bias = 0.0;
  Feature<double> y;
  Workspace<double> ws;
  conv2d_forward(s, weight.data(), &bias, x, y, ws);
  CHECK(y.data == x.data);
}

TEST_CASE("group norm backward matches finite differences") {
  const int c = 6, h = 3, w = 4;
  for (int groups : {1, 2, 3, 6}) {
    CAPTURE(groups);
    const std::size_t nx = std::size_t(c) * h * w;
    Vec theta = random_vec(nx + 2 * std::size_t(c), 200 + groups);
    Forward f = [&](const Vec& th) {
      Feature<double> x = unpack(th, 0, c, h, w);
      Feature<double> y;
      NormCache<double> cache;
      group_norm_forward(groups, th.data() + nx, th.data() + nx + c, x, y, cache);
      return y.data;
    };
    Backward b = [&](const Vec& th, const Vec& wgt) {
      Feature<double> x = unpack(th, 0, c, h, w);
      Feature<double> y;
      NormCache<double> cache;
      group_norm_forward(groups, th.data() + nx, th.data() + nx + c, x, y, cache);
      Feature<double> dy(c, h, w);
      dy.data = wgt;
      Vec g(th.size(), 0.0);
      Feature<double> dx;
      group_norm_backward(groups, th.data() + nx, cache, dy, g.data() + nx, g.data() + nx + c, dx);
      std::copy(dx.data.begin(), dx.data.end(), g.begin());
      return g;
    };
    CHECK(max_rel_error(theta, f, b, 11) < kTol);
  }
}

TEST_CASE("group norm normalizes each group") {
  const int c = 4, h = 5, w = 5;
  Feature<double> x(c, h, w);
  x.data = random_vec(x.size(), 3, 4.0);
  for (double& v : x.data) v += 3.0;
  const std::vector<double> gamma(c, 1.0), beta(c, 0.0);
  Feature<double> y;
  NormCache<double> cache;
  group_norm_forward(2, gamma.data(), beta.data(), x, y, cache);
  for (int g = 0; g < 2; ++g) {
    const auto first = y.data.begin() + std::ptrdiff_t(g) * 2 * h * w;
    const double n = 2.0 * h * w;
    double mean = 0.0, sq = 0.0;
    for (auto it = first; it != first + 2 * h * w; ++it) mean += *it;
    mean /= n;
    for (auto it = first; it != first + 2 * h * w; ++it) sq += (*it - mean) * (*it - mean);
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("group_count picks the largest divisor") {
  CHECK(group_count(32, 8) == 8);
  CHECK(group_count(12, 8) == 6);
  CHECK(group_count(7, 8) == 7);
  CHECK(group_count(14, 8) == 7);
  CHECK(group_count(5, 4) == 1);
}

TEST_CASE("silu backward matches finite differences") {
  Vec theta = random_vec(20, 300, 3.0);
  Forward f = [](const Vec& th) {
    Vec y;
    silu_forward(th, y);
    return y;
  };
  Backward b = [](const Vec& th, const Vec& wgt) {
    Vec dx;
    silu_backward(th, wgt, dx);
    return dx;
  };
  CHECK(max_rel_error(theta, f, b, 13) < kTol);
  Vec y;
  silu_forward(Vec{0.0, 1.0}, y);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("linear backward matches finite differences") {
  const int in = 5, out = 3;
  const std::size_t nw = std::size_t(in) * out;
  Vec theta = random_vec(in + nw + out, 400);
  Forward f = [&](const Vec& th) {
    Vec x(th.begin(), th.begin() + in);
    Vec y;
    linear_forward(in, out, th.data() + in, th.data() + in + nw, x, y);
    return y;
  };
  Backward b = [&](const Vec& th, const Vec& wgt) {
    Vec x(th.begin(), th.begin() + in);
    Vec g(th.size(), 0.0);
    Vec dx;
    linear_backward(in, out, th.data() + in, x, wgt, g.data() + in, g.data() + in + nw, &dx);
    std::copy(dx.begin(), dx.end(), g.begin());
    return g;
  };
  CHECK(max_rel_error(theta, f, b, 17) < kTol);
}

TEST_CASE("modulate backward matches finite differences") {
  const int c = 3, h = 2, w = 3;
  const std::size_t nx = std::size_t(c) * h * w;
  Vec theta = random_vec(nx + 2 * std::size_t(c), 500);
  Forward f = [&](const Vec& th) {
    Feature<double> x = unpack(th, 0, c, h, w);
    Feature<double> y;
    modulate_forward(x, th.data() + nx, th.data() + nx + c, y);
    return y.data;
  };
  Backward b = [&](const Vec& th, const Vec& wgt) {
    Feature<double> x = unpack(th, 0, c, h, w);
    Feature<double> dy(c, h, w);
    dy.data = wgt;
    Vec g(th.size(), 0.0);
    Feature<double> dx;
    modulate_backward(x, th.data() + nx, dy, g.data() + nx, g.data() + nx + c, dx);
    std::copy(dx.data.begin(), dx.data.end(), g.begin());
    return g;
  };
  CHECK(max_rel_error(theta, f, b, 19) < kTol);
}

TEST_CASE("upsample backward is the adjoint of forward") {
  const int c = 2, h = 3, w = 4;
  Vec theta = random_vec(std::size_t(c) * h * w, 600);
  Forward f = [&](const Vec& th) {
    Feature<double> x = unpack(th, 0, c, h, w);
    Feature<double> y;
    upsample2x_forward(x, y);
    return y.data;
  };
  Backward b = [&](const Vec&, const Vec& wgt) {
    Feature<double> dy(c, 2 * h, 2 * w);
    dy.data = wgt;
    Feature<double> dx;
    upsample2x_backward(dy, dx);
    return dx.data;
  };
  CHECK(max_rel_error(theta, f, b, 23) < kTol);

  Feature<double> x(1, 1, 2);
  x.data = {1.0, 2.0};
  Feature<double> y;
  upsample2x_forward(x, y);
  CHECK(y.data == Vec{1, 1, 2, 2, 1, 1, 2, 2});
}

TEST_CASE("attention backward matches finite differences") {
  const int c = 3, h = 2, w = 3;
  Vec theta = random_vec(3 * std::size_t(c) * h * w, 700);
  Forward f = [&](const Vec& th) {
    Feature<double> qkv = unpack(th, 0, 3 * c, h, w);
    Feature<double> o;
    AttentionCache<double> cache;
    Workspace<double> ws;
    attention_forward(c, qkv, o, cache, ws);
    return o.data;
  };
  Backward b = [&](const Vec& th, const Vec& wgt) {
    Feature<double> qkv = unpack(th, 0, 3 * c, h, w);
    Feature<double> o;
    AttentionCache<double> cache;
    Workspace<double> ws;
    attention_forward(c, qkv, o, cache, ws);
    Feature<double> d_o(c, h, w);
    d_o.data = wgt;
    Feature<double> dqkv;
    attention_backward(c, qkv, cache, d_o, dqkv, ws);
    return dqkv.data;
  };
  CHECK(max_rel_error(theta, f, b, 29) < kTol);
}

TEST_CASE("attention with constant keys averages the values") {
  const int c = 2, n = 4;
  Feature<double> qkv(3 * c, 1, n);
  const Vec v = random_vec(std::size_t(c) * n, 800);
  for (int i = 0; i < c * n; ++i) {
    qkv.data[std::size_t(i)] = 0.3 * i;  // q varies
    qkv.data[std::size_t(c * n + i)] = 1.0;  // k constant
    qkv.data[std::size_t(2 * c * n + i)] = v[std::size_t(i)];
  }
  Feature<double> o;
  AttentionCache<double> cache;
  Workspace<double> ws;
  attention_forward(c, qkv, o, cache, ws);
  for (int ch = 0; ch < c; ++ch) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += v[std::size_t(ch * n + j)];
    mean /= n;
    for (int j = 0; j < n; ++j) CHECK(o.data[std::size_t(ch * n + j)] == doctest::Approx(mean));
  }
}

TEST_CASE("concat and split are inverse") {
  Feature<double> a(2, 2, 2), b(1, 2, 2);
  a.data = random_vec(a.size(), 1);
  b.data = random_vec(b.size(), 2);
  const Feature<double> ab = concat(a, b);
  CHECK(ab.channels == 3);
  Feature<double> da, db;
  split(ab, 2, da, db);
  CHECK(da.data == a.data);
  CHECK(db.data == b.data);
  CHECK_THROWS_AS(concat(a, Feature<double>(1, 3, 2)), std::invalid_argument);
}

TEST_CASE("timestep embedding") {
  const auto e0 = timestep_embedding<double>(0, 8);
  REQUIRE(e0.size() == 8);
  for (int i = 0; i < 4; ++i) {
    CHECK(e0[std::size_t(i)] == 0.0);
    CHECK(e0[std::size_t(i + 4)] == 1.0);
  }
  const auto e5 = timestep_embedding<double>(5, 8);
  CHECK(e5[0] == doctest::Approx(std::sin(5.0)));
  CHECK(e5[1] == doctest::Approx(std::sin(5.0 * std::pow(10000.0, -0.25))));
  CHECK(e5[4] == doctest::Approx(std::cos(5.0)));
  CHECK(timestep_embedding<double>(5, 8) != timestep_embedding<double>(6, 8));
}
