// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace resdiff {

namespace {

std::vector<double> to_byte_scale(const ImageTensor& a) {
  const double lo = a.range().lo, span = double(a.range().hi) - lo;
  if (!(span > 0)) throw std::invalid_argument("degenerate value range");
  std::vector<double> out(a.size());
  const auto d = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (double(d[i]) - lo) * 255.0 / span;
  return out;
}

}  // namespace

double mse(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "mse");
  if (a.empty()) throw std::invalid_argument("mse of empty images");
  const auto x = to_byte_scale(a), y = to_byte_scale(b);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
  return sum / double(x.size());
}

double psnr_from_mse(double m, double peak) {
  if (m < 0) throw std::invalid_argument("negative mse");
  if (m == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

double psnr(const ImageTensor& a, const ImageTensor& b) { return psnr_from_mse(mse(a, b)); }

double ssim_plane(std::span<const double> a, std::span<const double> b, int h, int w,
                  const SsimOptions& opt) {
  if (a.size() != std::size_t(h) * w || b.size() != a.size())
    throw std::invalid_argument("ssim: plane sizes do not match");
  const int win = opt.window;
  if (win < 1 || win % 2 == 0) throw std::invalid_argument("ssim: window must be odd and >= 1");
  if (h < win || w < win)
    throw std::invalid_argument("ssim: images must be at least " + std::to_string(win) + "x" +
                                std::to_string(win));
  std::vector<double> g(static_cast<std::size_t>(win));
  double gs = 0;
  for (int i = 0; i < win; ++i) {
    const double d = i - (win - 1) / 2.0;
    gs += g[std::size_t(i)] = std::exp(-d * d / (2 * opt.sigma * opt.sigma));
  }
  for (auto& v : g) v /= gs;

  const int oh = h - win + 1, ow = w - win + 1;
  // Valid separable filtering of the five moment images.
  auto filter = [&](auto value) {
    std::vector<double> rows(std::size_t(h) * ow), out(std::size_t(oh) * ow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0;
        for (int k = 0; k < win; ++k) acc += g[std::size_t(k)] * value(std::size_t(y) * w + x + k);
        rows[std::size_t(y) * ow + x] = acc;
      }
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0;
        for (int k = 0; k < win; ++k) acc += g[std::size_t(k)] * rows[std::size_t(y + k) * ow + x];
        out[std::size_t(y) * ow + x] = acc;
      }
    return out;
  };
  const auto mu_a = filter([&](std::size_t i) { return a[i]; });
  const auto mu_b = filter([&](std::size_t i) { return b[i]; });
  const auto aa = filter([&](std::size_t i) { return a[i] * a[i]; });
  const auto bb = filter([&](std::size_t i) { return b[i] * b[i]; });
  const auto ab = filter([&](std::size_t i) { return a[i] * b[i]; });

  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
  double total = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = aa[i] - mu_a[i] * mu_a[i];
    const double vb = bb[i] - mu_b[i] * mu_b[i];
    const double cov = ab[i] - mu_a[i] * mu_b[i];
    const double num = (mu_a[i] * mu_b[i] + mu_b[i] * mu_a[i] + c1) * (cov + cov + c2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / double(mu_a.size());
}

double ssim(const ImageTensor& a, const ImageTensor& b, const SsimOptions& opt) {
  require_same_shape(a, b, "ssim");
  if (a.channels() < 1) throw std::invalid_argument("ssim of empty images");
  const auto x = to_byte_scale(a), y = to_byte_scale(b);
  const std::size_t plane = a.plane_size();
  double sum = 0;
  for (int c = 0; c < a.channels(); ++c) {
    const std::span<const double> xs(x.data() + std::size_t(c) * plane, plane);
    const std::span<const double> ys(y.data() + std::size_t(c) * plane, plane);
    sum += ssim_plane(xs, ys, a.height(), a.width(), opt);
  }
  return sum / a.channels();
}

double MatchReport::precision() const { return tp + fp > 0 ? double(tp) / (tp + fp) : 0.0; }
double MatchReport::recall() const { return tp + fn > 0 ? double(tp) / (tp + fn) : 0.0; }
double MatchReport::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}
double MatchReport::mean_matched_score() const { return tp > 0 ? sum_iou_matched / tp : 0.0; }
double MatchReport::mean_true_score() const {
  return n_true() > 0 ? sum_iou_matched / n_true() : 0.0;
}
double MatchReport::panoptic_quality() const {
  const double den = tp + fp / 2.0 + fn / 2.0;
  return den > 0 ? sum_iou_matched / den : 0.0;
}

std::vector<std::vector<double>> iou_matrix(const InstanceMap& pred, const InstanceMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("match: instance maps differ in shape");
  const int np = pred.count(), ng = gt.count();
  std::vector<std::vector<long>> inter(std::size_t(np) + 1, std::vector<long>(std::size_t(ng) + 1, 0));
  std::vector<long> area_p(std::size_t(np) + 1, 0), area_g(std::size_t(ng) + 1, 0);
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const auto p = pred.labels[i], g = gt.labels[i];
    ++area_p[std::size_t(p)];
    ++area_g[std::size_t(g)];
    ++inter[std::size_t(p)][std::size_t(g)];
  }
  std::vector<std::vector<double>> iou(std::size_t(np), std::vector<double>(std::size_t(ng), 0.0));
  for (int p = 1; p <= np; ++p)
    for (int g = 1; g <= ng; ++g) {
      const long in = inter[std::size_t(p)][std::size_t(g)];
      if (in == 0) continue;
      const long uni = area_p[std::size_t(p)] + area_g[std::size_t(g)] - in;
      iou[std::size_t(p - 1)][std::size_t(g - 1)] = double(in) / double(uni);
    }
  return iou;
}

// Hungarian algorithm with potentials on a square cost matrix (minimizing
// the negated score).
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& score) {
  const std::size_t rows = score.size();
  const std::size_t cols = rows > 0 ? score[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  auto cost = [&](std::size_t r, std::size_t c) {
    return (r < rows && c < cols) ? -score[r][c] : 0.0;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(rows, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] - 1 < rows && j - 1 < cols) assign[p[j] - 1] = int(j - 1);
  return assign;
}

MatchReport match_instances(const InstanceMap& pred, const InstanceMap& gt, double tau) {
  if (!(tau > 0 && tau <= 1)) throw std::invalid_argument("match: tau must be in (0, 1]");
  auto iou = iou_matrix(pred, gt);
  const int np = pred.count(), ng = gt.count();
  // Pairs below tau may not be matched: score them zero so the assignment
  // ignores them.
  auto score = iou;
  for (auto& row : score)
    for (auto& s : row)
      if (s < tau) s = 0.0;
  MatchReport r;
  r.tau = tau;
  const auto assign = max_weight_assignment(score);
  for (std::size_t p = 0; p < assign.size(); ++p) {
    if (assign[p] < 0) continue;
    const double s = score[p][std::size_t(assign[p])];
    if (s > 0) {
      ++r.tp;
      r.sum_iou_matched += s;
    }
  }
  r.fp = np - r.tp;
  r.fn = ng - r.tp;
  return r;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: lengths differ");
  if (a.size() < 2) return std::nullopt;
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> count_correlation(const std::vector<InstanceMap>& preds,
                                        const std::vector<InstanceMap>& gts) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("count_correlation: " + std::to_string(preds.size()) +
                                " predictions vs " + std::to_string(gts.size()) + " ground truths");
  if (preds.size() < 3) throw std::invalid_argument("count_correlation needs at least 3 pairs");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    a.push_back(relabel_contiguous(preds[i]).count());
    b.push_back(relabel_contiguous(gts[i]).count());
  }
  return pearson(a, b);
}

std::optional<double> welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) return std::nullopt;
  const double va = stddev(a) * stddev(a) / double(a.size());
  const double vb = stddev(b) * stddev(b) / double(b.size());
  const double se2 = va + vb;
  if (!(se2 > 0)) return std::nullopt;
  const double t = (mean(a) - mean(b)) / std::sqrt(se2);
  const double df = se2 * se2 /
                    (va * va / double(a.size() - 1) + vb * vb / double(b.size() - 1));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

}  // namespace resdiff
