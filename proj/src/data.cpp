// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "resdiff/crif.hpp"
#include "resdiff/parallel.hpp"
#include "resdiff/rng.hpp"

namespace fs = std::filesystem;

namespace resdiff {

int InstanceMap::count() const {
  std::int32_t k = 0;
  for (auto v : labels) k = std::max(k, v);
  return k;
}

bool InstanceMap::contiguous() const {
  const int k = count();
  std::vector<bool> seen(std::size_t(k) + 1, false);
  for (auto v : labels) {
    if (v < 0) return false;
    seen[std::size_t(v)] = true;
  }
  for (int i = 1; i <= k; ++i)
    if (!seen[std::size_t(i)]) return false;
  return true;
}

InstanceMap relabel_contiguous(const InstanceMap& m) {
  InstanceMap out(m.height, m.width);
  std::map<std::int32_t, std::int32_t> remap;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const auto v = m.labels[i];
    if (v <= 0) continue;
    auto [it, inserted] = remap.emplace(v, std::int32_t(remap.size() + 1));
    out.labels[i] = it->second;
  }
  return out;
}

namespace {

constexpr int kDy[4] = {-1, 1, 0, 0};
constexpr int kDx[4] = {0, 0, -1, 1};

// 4-connected flood fill over pixels where `member(idx)` holds. Returns
// component id per pixel (-1 outside) and component sizes.
template <class Member>
std::vector<int> label_components(int h, int w, Member member, std::vector<std::size_t>& sizes,
                                  std::vector<bool>& touches_border) {
  std::vector<int> comp(std::size_t(h) * w, -1);
  std::vector<std::size_t> stack;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t start = std::size_t(y0) * w + x0;
      if (comp[start] >= 0 || !member(start)) continue;
      const int id = static_cast<int>(sizes.size());
      sizes.push_back(0);
      touches_border.push_back(false);
      comp[start] = id;
      stack.push_back(start);
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        ++sizes[std::size_t(id)];
        const int y = static_cast<int>(p / std::size_t(w));
        const int x = static_cast<int>(p % std::size_t(w));
        if (y == 0 || x == 0 || y == h - 1 || x == w - 1) touches_border[std::size_t(id)] = true;
        for (int k = 0; k < 4; ++k) {
          const int ny = y + kDy[k], nx = x + kDx[k];
          if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
          const std::size_t q = std::size_t(ny) * w + nx;
          if (comp[q] < 0 && member(q)) {
            comp[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
  return comp;
}

}  // namespace

std::vector<int> disconnected_instances(const InstanceMap& m) {
  std::vector<int> bad;
  const int k = m.count();
  std::vector<int> pieces(std::size_t(k) + 1, 0);
  std::vector<int> seen(std::size_t(m.height) * m.width, -1);
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < m.labels.size(); ++s) {
    const int lab = m.labels[s];
    if (lab <= 0 || seen[s] >= 0) continue;
    ++pieces[std::size_t(lab)];
    seen[s] = lab;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int y = static_cast<int>(p / std::size_t(m.width));
      const int x = static_cast<int>(p % std::size_t(m.width));
      for (int d = 0; d < 4; ++d) {
        const int ny = y + kDy[d], nx = x + kDx[d];
        if (ny < 0 || nx < 0 || ny >= m.height || nx >= m.width) continue;
        const std::size_t q = std::size_t(ny) * m.width + nx;
        if (seen[q] < 0 && m.labels[q] == lab) {
          seen[q] = lab;
          stack.push_back(q);
        }
      }
    }
  }
  for (int i = 1; i <= k; ++i)
    if (pieces[std::size_t(i)] > 1) bad.push_back(i);
  return bad;
}

BoundaryMask instances_to_boundary(const InstanceMap& m) {
  if (m.labels.size() != std::size_t(m.height) * m.width || m.height < 0 || m.width < 0)
    throw std::invalid_argument("instance map size does not match its shape");
  BoundaryMask b(m.height, m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const auto v = m.at(y, x);
      for (int k = 0; k < 4; ++k) {
        const int ny = y + kDy[k], nx = x + kDx[k];
        if (ny < 0 || nx < 0 || ny >= m.height || nx >= m.width) continue;
        if (m.at(ny, nx) != v) {
          b.at(y, x) = 1;
          break;
        }
      }
    }
  return b;
}

BoundaryMask binarize(std::span<const float> plane, int height, int width, double threshold) {
  if (plane.size() != std::size_t(height) * width)
    throw std::invalid_argument("plane size does not match its shape");
  BoundaryMask b(height, width);
  for (std::size_t i = 0; i < plane.size(); ++i) b.bits[i] = plane[i] >= threshold ? 1 : 0;
  return b;
}

InstanceMap boundary_to_instances(const BoundaryMask& b, const BoundaryDecodeOptions& opt) {
  const int h = b.height, w = b.width;
  if (b.bits.size() != std::size_t(h) * w)
    throw std::invalid_argument("boundary mask size does not match its shape");
  std::vector<std::size_t> sizes;
  std::vector<bool> border;
  const auto comp = label_components(
      h, w, [&](std::size_t i) { return b.bits[i] == 0; }, sizes, border);

  const double image_area = double(h) * w;
  std::vector<std::int32_t> label_of(sizes.size(), 0);
  std::int32_t next = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const bool exterior = border[c] && double(sizes[c]) > opt.exterior_fraction * image_area;
    const bool tiny = sizes[c] < std::size_t(std::max(opt.min_area, 0));
    if (!exterior && !tiny) label_of[c] = ++next;
  }

  InstanceMap out(h, w);
  for (std::size_t i = 0; i < out.labels.size(); ++i)
    out.labels[i] = comp[i] >= 0 ? label_of[std::size_t(comp[i])] : 0;

  if (opt.reclaim_boundary) {
    const InstanceMap before = out;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (b.at(y, x) == 0) continue;
        std::int32_t found = 0;
        bool ambiguous = false;
        for (int k = 0; k < 4; ++k) {
          const int ny = y + kDy[k], nx = x + kDx[k];
          if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
          const auto v = before.at(ny, nx);
          if (v == 0 || b.at(ny, nx) != 0) continue;
          if (found == 0)
            found = v;
          else if (found != v)
            ambiguous = true;
        }
        if (found != 0 && !ambiguous) out.at(y, x) = found;
      }
  }
  return out;
}

ImageTensor instances_to_tensor(const InstanceMap& m) {
  ImageTensor t(1, m.height, m.width, ValueRange{0.0f, float(std::max(1, m.count()))});
  auto d = t.data();
  for (std::size_t i = 0; i < m.labels.size(); ++i) d[i] = static_cast<float>(m.labels[i]);
  return t;
}

InstanceMap tensor_to_instances(const ImageTensor& t) {
  if (t.channels() != 1) throw std::invalid_argument("instance tensor must have one channel");
  InstanceMap m(t.height(), t.width());
  const auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const float v = d[i];
    if (!(v >= 0) || v != std::floor(v) || v > 2.0e9f)
      throw std::invalid_argument("instance labels must be non-negative integers");
    m.labels[i] = static_cast<std::int32_t>(v);
  }
  return m;
}

ImageTensor boundary_to_tensor(const BoundaryMask& b) {
  ImageTensor t(1, b.height, b.width, kUnitRange);
  auto d = t.data();
  for (std::size_t i = 0; i < b.bits.size(); ++i) d[i] = b.bits[i] ? 1.0f : 0.0f;
  return t;
}

void SampleRecord::validate() const {
  auto fail = [&](const std::string& m) {
    throw std::invalid_argument("record " + id + ": " + m);
  };
  if (bf.channels() != 1) fail("brightfield must have 1 channel, got " + bf.shape_string());
  if (fluo.channels() != 5) fail("fluorescence must have 5 channels, got " + fluo.shape_string());
  if (seg.channels() != 2) fail("segmentation must have 2 channels, got " + seg.shape_string());
  if (bf.height() < 1 || bf.width() < 1) fail("empty image");
  auto same = [&](int h, int w, const char* what) {
    if (h != bf.height() || w != bf.width())
      fail(std::string(what) + " is " + std::to_string(h) + "x" + std::to_string(w) +
           ", brightfield is " + std::to_string(bf.height()) + "x" + std::to_string(bf.width()));
  };
  same(fluo.height(), fluo.width(), "fluorescence");
  same(seg.height(), seg.width(), "segmentation");
  if (nuclei) same(nuclei->height, nuclei->width, "nuclei instance map");
  if (cells) same(cells->height, cells->width, "cell instance map");
  if (!bf.all_finite() || !fluo.all_finite() || !seg.all_finite()) fail("non-finite values");
}

BoundaryMask SampleRecord::boundary(int channel, double threshold) const {
  const ImageTensor unit = seg.range() == kUnitRange ? seg : seg.remapped(kUnitRange);
  return binarize(unit.channel(channel), seg.height(), seg.width(), threshold);
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SyntheticParams::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("generator: " + m); };
  if (min_cells < 1 || max_cells < min_cells) fail("need 1 <= min_cells <= max_cells");
  if (!(cell_radius_min > 0) || cell_radius_max < cell_radius_min)
    fail("need 0 < cell_radius_min <= cell_radius_max");
  if (!(nucleus_ratio_min > 0) || nucleus_ratio_max < nucleus_ratio_min || nucleus_ratio_max >= 1)
    fail("nucleus ratios must satisfy 0 < min <= max < 1");
  if (!(nucleus_radius_min >= 1)) fail("nucleus_radius_min must be >= 1");
  if (cell_radius_min < nucleus_radius_min + 2)
    fail("cell_radius_min must leave room for a nucleus (>= nucleus_radius_min + 2)");
  if (min_separation < 0) fail("min_separation must be >= 0");
  if (placement_attempts < 1) fail("placement_attempts must be >= 1");
  if (if_noise < 0 || bf_noise < 0 || agp_rim < 0) fail("noise levels must be >= 0");
}

namespace {

struct Ellipse {
  double cy = 0, cx = 0, a = 1, b = 1, theta = 0;
  double c = 1, s = 0;  // cos / sin of theta

  void set_theta(double t) {
    theta = t;
    c = std::cos(t);
    s = std::sin(t);
  }
  // Normalized radius: < 1 inside, 1 on the outline.
  double rho(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double u = (dx * c + dy * s) / a;
    const double v = (-dx * s + dy * c) / b;
    return std::sqrt(u * u + v * v);
  }
  double extent() const { return std::max(a, b); }
};

struct Cell {
  Ellipse body;
  Ellipse nucleus;
};

using Plane = std::vector<double>;

void gaussian_blur(Plane& p, int size, double sigma) {
  if (sigma <= 0) return;
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> k(std::size_t(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[std::size_t(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  auto reflect = [size](int i) {
    while (i < 0 || i >= size) i = i < 0 ? -i - 1 : 2 * size - i - 1;
    return i;
  };
  Plane tmp(p.size());
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[std::size_t(i + r)] * p[std::size_t(y) * size + reflect(x + i)];
      tmp[std::size_t(y) * size + x] = acc;
    }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[std::size_t(i + r)] * tmp[std::size_t(reflect(y + i)) * size + x];
      p[std::size_t(y) * size + x] = acc;
    }
}

// Smooth zero-mean texture with roughly unit standard deviation.
Plane texture(int size, double sigma, RngState& rng) {
  Plane p(std::size_t(size) * size);
  for (auto& v : p) v = rng.normal();
  gaussian_blur(p, size, sigma);
  const double gain = 2.0 * std::sqrt(std::numbers::pi) * sigma;
  for (auto& v : p) v *= gain;
  return p;
}

std::vector<std::size_t> rasterize(const Ellipse& e, int size) {
  std::vector<std::size_t> px;
  const int r = static_cast<int>(std::ceil(e.extent())) + 1;
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy)) - r);
  const int y1 = std::min(size - 1, static_cast<int>(std::ceil(e.cy)) + r);
  const int x0 = std::max(0, static_cast<int>(std::floor(e.cx)) - r);
  const int x1 = std::min(size - 1, static_cast<int>(std::ceil(e.cx)) + r);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (e.rho(y, x) <= 1.0) px.push_back(std::size_t(y) * size + x);
  return px;
}

// Rejection placement of non-overlapping cells with a background gap.
std::vector<Cell> place_cells(int size, const SyntheticParams& p, RngState& rng) {
  const auto target = static_cast<int>(rng.uniform_int(p.min_cells, p.max_cells));
  double scale = 1.0;
  std::vector<Cell> cells;
  for (;;) {
    cells.clear();
    // blocked[i]: pixel is a cell pixel or within min_separation of one.
    std::vector<std::uint8_t> blocked(std::size_t(size) * size, 0);
    const double rmin = p.cell_radius_min * scale;
    const double rmax = p.cell_radius_max * scale;
    for (int attempt = 0; attempt < p.placement_attempts * target && int(cells.size()) < target;
         ++attempt) {
      Cell c;
      c.body.a = rmin + (rmax - rmin) * rng.uniform();
      c.body.b = rmin + (rmax - rmin) * rng.uniform();
      c.body.set_theta(std::numbers::pi * rng.uniform());
      const double ext = c.body.extent();
      const double lo = ext + 1.0, hi = size - 2.0 - ext;
      if (hi < lo) continue;
      c.body.cy = lo + (hi - lo) * rng.uniform();
      c.body.cx = lo + (hi - lo) * rng.uniform();
      if (blocked[std::size_t(std::lround(c.body.cy)) * size + std::size_t(std::lround(c.body.cx))])
        continue;
      const auto px = rasterize(c.body, size);
      bool ok = !px.empty();
      for (auto i : px)
        if (blocked[i]) {
          ok = false;
          break;
        }
      if (!ok) continue;

      const double ratio_a =
          p.nucleus_ratio_min + (p.nucleus_ratio_max - p.nucleus_ratio_min) * rng.uniform();
      const double ratio_b =
          p.nucleus_ratio_min + (p.nucleus_ratio_max - p.nucleus_ratio_min) * rng.uniform();
      c.nucleus.a = std::clamp(c.body.a * ratio_a, p.nucleus_radius_min, c.body.a - 2.0);
      c.nucleus.b = std::clamp(c.body.b * ratio_b, p.nucleus_radius_min, c.body.b - 2.0);
      c.nucleus.set_theta(c.body.theta);
      const double slack = std::min(c.body.a - c.nucleus.a, c.body.b - c.nucleus.b) - 1.5;
      const double off = std::max(0.0, slack) * 0.5 * rng.uniform();
      const double dir = 2 * std::numbers::pi * rng.uniform();
      c.nucleus.cy = c.body.cy + off * std::sin(dir);
      c.nucleus.cx = c.body.cx + off * std::cos(dir);
      // Keep the nucleus strictly inside the cell.
      for (auto i : rasterize(c.nucleus, size)) {
        const int y = static_cast<int>(i / std::size_t(size)), x = static_cast<int>(i % std::size_t(size));
        if (c.body.rho(y, x) > 1.0) {
          c.nucleus.cy = c.body.cy;
          c.nucleus.cx = c.body.cx;
          break;
        }
      }

      const int sep = p.min_separation;
      for (auto i : px) {
        const int y = static_cast<int>(i / std::size_t(size)), x = static_cast<int>(i % std::size_t(size));
        for (int dy = -sep; dy <= sep; ++dy)
          for (int dx = -sep; dx <= sep; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny >= 0 && nx >= 0 && ny < size && nx < size) blocked[std::size_t(ny) * size + nx] = 1;
          }
      }
      cells.push_back(c);
    }
    if (int(cells.size()) >= std::min(target, p.min_cells)) break;
    // Crowded: shrink and retry while nuclei still fit.
    const double next = scale * 0.9;
    if (p.cell_radius_min * next < p.nucleus_radius_min + 2) {
      if (cells.empty())
        throw std::invalid_argument("generator: a " + std::to_string(size) + "x" +
                                    std::to_string(size) + " image cannot fit one cell");
      break;
    }
    scale = next;
  }
  return cells;
}

std::string well_name(std::size_t index) {
  static constexpr const char* kRows = "ABCDEFGH";
  char buf[8];
  std::snprintf(buf, sizeof buf, "%c%02d", kRows[(index / 12) % 8], int(index % 12) + 1);
  return buf;
}

}  // namespace

SampleRecord generate_record(std::size_t index, int size, std::uint64_t seed,
                             const SyntheticParams& params) {
  params.validate();
  if (size < 8) throw std::invalid_argument("generator: image size must be >= 8");
  if (size < 2 * (params.nucleus_radius_min + 2) + 3)
    throw std::invalid_argument("generator: a " + std::to_string(size) + "x" +
                                std::to_string(size) + " image cannot fit one cell");
  RngState rng = RngState(seed).substream(index);
  const auto cells = place_cells(size, params, rng);
  const std::size_t n = std::size_t(size) * size;

  SampleRecord r;
  char id[32];
  std::snprintf(id, sizeof id, "s%05zu", index);
  r.id = id;
  r.plate = "SYN" + std::to_string(seed);
  r.well = well_name(index);

  InstanceMap nuclei(size, size), cellmap(size, size);
  // Per-pixel geometry: owning cell, its radii, inside-nucleus flag.
  std::vector<int> owner(n, -1);
  std::vector<double> rho_cell(n, 2.0), rho_nuc(n, 2.0), rim_width(n, 0.0), nuc_rim(n, 0.0);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& c = cells[k];
    for (auto i : rasterize(c.body, size)) {
      const int y = static_cast<int>(i / std::size_t(size)), x = static_cast<int>(i % std::size_t(size));
      cellmap.labels[i] = std::int32_t(k + 1);
      owner[i] = int(k);
      rho_cell[i] = c.body.rho(y, x);
      rho_nuc[i] = c.nucleus.rho(y, x);
      rim_width[i] = 1.5 / std::min(c.body.a, c.body.b);
      nuc_rim[i] = 1.2 / std::min(c.nucleus.a, c.nucleus.b);
      if (rho_nuc[i] <= 1.0) nuclei.labels[i] = std::int32_t(k + 1);
    }
  }

  const Plane t_fine = texture(size, 1.0, rng);
  const Plane t_mid = texture(size, 1.5, rng);
  const Plane t_coarse = texture(size, 3.0, rng);
  const Plane t_spots = texture(size, 0.7, rng);

  r.fluo = ImageTensor(5, size, size, kUnitRange);
  for (std::size_t i = 0; i < n; ++i) {
    double dna = 0.03, rna = 0.03, er = 0.03, agp = 0.03, mito = 0.03;
    if (owner[i] >= 0) {
      const bool in_nucleus = rho_nuc[i] <= 1.0;
      const bool on_rim = rho_cell[i] > 1.0 - rim_width[i];
      if (in_nucleus) {
        dna = 0.55 + 0.25 * (1.0 - rho_nuc[i] * rho_nuc[i]) + 0.08 * t_mid[i];
        rna = 0.12 + 0.03 * t_coarse[i] + (t_spots[i] > 1.2 ? 0.45 : 0.0);  // nucleoli
        er = 0.08;
        agp = 0.06;
        mito = 0.05;
      } else {
        rna = 0.25 + 0.06 * t_coarse[i];
        er = 0.15 + 0.4 * std::exp(-1.5 * (rho_nuc[i] - 1.0)) + 0.06 * t_mid[i];
        agp = 0.08 + 0.04 * t_coarse[i];
        mito = 0.1 + 0.5 * std::clamp(t_fine[i] - 0.8, 0.0, 1.0);
      }
      if (on_rim) agp += params.agp_rim;
    }
    const double vals[5] = {dna, rna, er, agp, mito};
    for (int c = 0; c < 5; ++c)
      r.fluo.data()[std::size_t(c) * n + i] =
          static_cast<float>(std::clamp(vals[c] + params.if_noise * rng.normal(), 0.0, 1.0));
  }

  // Brightfield: faint cell bodies with bright halos, nuclei with dark
  // rims, blurred, squashed and offset.
  Plane bf(n, 0.55);
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] < 0) continue;
    double v = -0.06 + 0.03 * t_coarse[i];
    if (rho_cell[i] > 1.0 - rim_width[i]) v += 0.08;
    if (rho_nuc[i] <= 1.0) {
      v += 0.05 * (1.0 - rho_nuc[i] * rho_nuc[i]);
      if (rho_nuc[i] > 1.0 - nuc_rim[i]) v -= 0.07;
    }
    bf[i] += v;
  }
  gaussian_blur(bf, size, 0.7);
  const double offset = 0.1 * (rng.uniform() - 0.5);
  r.bf = ImageTensor(1, size, size, kUnitRange);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = 0.5 + 0.4 * std::tanh(2.2 * (bf[i] - 0.5)) + offset + params.bf_noise * rng.normal();
    r.bf.data()[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }

  r.seg = concat_channels(boundary_to_tensor(instances_to_boundary(nuclei)),
                          boundary_to_tensor(instances_to_boundary(cellmap)));
  r.nuclei = std::move(nuclei);
  r.cells = std::move(cellmap);
  return r;
}

std::vector<SampleRecord> generate_synthetic(std::size_t n, int size, std::uint64_t seed,
                                             const SyntheticParams& params) {
  params.validate();
  std::vector<SampleRecord> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = generate_record(i, size, seed, params); });
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

void write_instances(const std::string& path, const InstanceMap& m) {
  ImageTensor t = instances_to_tensor(m);
  write_crif(path, t);
}

}  // namespace

void write_record_png(const std::string& dir, const SampleRecord& r) {
  const int h = r.height(), w = r.width();
  write_png16(dir + "/bf.png", r.bf.channel(0), h, w, r.bf.range().lo, r.bf.range().hi);
  for (int c = 0; c < r.fluo.channels(); ++c)
    write_png16(dir + "/" + lower(kFluorescenceChannels[std::size_t(c)]) + ".png", r.fluo.channel(c),
                h, w, r.fluo.range().lo, r.fluo.range().hi);
  for (int c = 0; c < r.seg.channels(); ++c)
    write_png16(dir + "/seg_" + kBoundaryChannels[std::size_t(c)] + ".png", r.seg.channel(c), h, w,
                r.seg.range().lo, r.seg.range().hi);
}

void write_dataset(const std::string& root, const std::vector<SampleRecord>& records, bool png) {
  fs::create_directories(root);
  for (const auto& r : records) r.validate();
  parallel_for(records.size(), [&](std::size_t i) {
    const auto& r = records[i];
    const fs::path dir = fs::path(root) / (r.split.empty() ? "all" : r.split) / r.id;
    fs::create_directories(dir);
    write_crif((dir / "bf.crif").string(), r.bf);
    write_crif((dir / "if.crif").string(), r.fluo);
    write_crif((dir / "seg.crif").string(), r.seg);
    if (r.nuclei) write_instances((dir / "nuclei.inst.crif").string(), *r.nuclei);
    if (r.cells) write_instances((dir / "cells.inst.crif").string(), *r.cells);
    if (png) write_record_png(dir.string(), r);
  });
  std::ofstream m(fs::path(root) / "manifest.tsv");
  m << "id\tsplit\tplate\twell\theight\twidth\tnuclei\tcells\n";
  for (const auto& r : records)
    m << r.id << '\t' << (r.split.empty() ? "all" : r.split) << '\t' << r.plate << '\t' << r.well
      << '\t' << r.height() << '\t' << r.width() << '\t' << (r.nuclei ? r.nuclei->count() : -1)
      << '\t' << (r.cells ? r.cells->count() : -1) << '\n';
  if (!m) throw std::runtime_error("cannot write manifest in " + root);
}

SampleRecord load_record(const std::string& dir, const std::string& id) {
  SampleRecord r;
  r.id = id;
  const fs::path d(dir);
  if (!fs::is_directory(d)) throw std::runtime_error("record " + id + ": no directory " + dir);
  auto has = [&](const char* f) { return fs::exists(d / f); };
  std::vector<std::string> missing;

  if (has("bf.crif"))
    r.bf = read_crif((d / "bf.crif").string());
  else if (has("bf.png"))
    r.bf = read_png_gray((d / "bf.png").string());
  else
    missing.push_back("bf");

  if (has("if.crif")) {
    r.fluo = read_crif((d / "if.crif").string());
  } else {
    std::vector<ImageTensor> planes;
    for (const char* name : kFluorescenceChannels) {
      const fs::path f = d / (lower(name) + ".png");
      if (fs::exists(f))
        planes.push_back(read_png_gray(f.string()));
      else
        missing.push_back(lower(name));
    }
    if (planes.size() == kFluorescenceChannels.size()) {
      for (const auto& p : planes)
        if (!p.same_shape(planes[0]))
          throw std::runtime_error("record " + id + ": fluorescence channels differ in size");
      r.fluo = planes[0];
      for (std::size_t i = 1; i < planes.size(); ++i) r.fluo = concat_channels(r.fluo, planes[i]);
    }
  }

  auto read_labels = [&](const char* stem) -> std::optional<InstanceMap> {
    const fs::path c = d / (std::string(stem) + ".inst.crif");
    if (fs::exists(c)) return tensor_to_instances(read_crif(c.string()));
    const fs::path p = d / (std::string(stem) + ".png");
    if (fs::exists(p)) return relabel_contiguous(tensor_to_instances(read_png_gray(p.string(), true)));
    return std::nullopt;
  };
  r.nuclei = read_labels("nuclei");
  r.cells = read_labels("cells");

  if (has("seg.crif")) {
    r.seg = read_crif((d / "seg.crif").string());
  } else if (r.nuclei && r.cells) {
    r.seg = concat_channels(boundary_to_tensor(instances_to_boundary(*r.nuclei)),
                            boundary_to_tensor(instances_to_boundary(*r.cells)));
  } else {
    missing.push_back("seg");
  }

  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw std::runtime_error("record " + id + ": missing channels: " + list);
  }
  try {
    r.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
  return r;
}

LoadedDataset load_directory(const std::string& path, const std::string& split) {
  const fs::path root(path);
  if (!fs::is_directory(root)) throw std::runtime_error("dataset directory not found: " + path);

  struct Entry {
    std::string id, split, plate, well;
    fs::path dir;
  };
  std::vector<Entry> entries;
  const fs::path manifest = root / "manifest.tsv";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      Entry e;
      std::getline(ss, e.id, '\t');
      std::getline(ss, e.split, '\t');
      std::getline(ss, e.plate, '\t');
      std::getline(ss, e.well, '\t');
      if (!split.empty() && e.split != split) continue;
      e.dir = root / e.split / e.id;
      entries.push_back(std::move(e));
    }
  } else {
    const fs::path base = split.empty() ? root : root / split;
    if (!fs::is_directory(base)) throw std::runtime_error("dataset directory not found: " + base.string());
    for (const auto& de : fs::directory_iterator(base))
      if (de.is_directory()) entries.push_back({de.path().filename().string(), split, "", "", de.path()});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.id < b.id; });
  }

  std::vector<std::optional<SampleRecord>> loaded(entries.size());
  std::vector<std::string> errors(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    try {
      SampleRecord r = load_record(entries[i].dir.string(), entries[i].id);
      r.split = entries[i].split;
      r.plate = entries[i].plate;
      r.well = entries[i].well;
      loaded[i] = std::move(r);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  LoadedDataset out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!loaded[i]) {
      out.errors.push_back({entries[i].id, errors[i]});
      continue;
    }
    for (const auto* m : {&loaded[i]->nuclei, &loaded[i]->cells}) {
      if (!*m) continue;
      const auto bad = disconnected_instances(**m);
      if (!bad.empty())
        out.warnings.push_back({entries[i].id, std::to_string(bad.size()) +
                                                   " instance(s) are not 4-connected"});
      if (!(*m)->contiguous())
        out.warnings.push_back({entries[i].id, "instance labels are not contiguous"});
    }
    out.records.push_back(std::move(*loaded[i]));
  }
  return out;
}

bool is_black(const ImageTensor& fluo, double threshold) {
  const double lo = fluo.range().lo, span = double(fluo.range().hi) - lo;
  for (float v : fluo.data())
    if ((double(v) - lo) / span >= threshold) return false;
  return true;
}

std::vector<SampleRecord> exclusion_filter(std::vector<SampleRecord> records, double threshold,
                                           std::vector<std::string>* excluded) {
  std::vector<SampleRecord> kept;
  kept.reserve(records.size());
  for (auto& r : records) {
    if (is_black(r.fluo, threshold)) {
      if (excluded != nullptr) excluded->push_back(r.id);
    } else {
      kept.push_back(std::move(r));
    }
  }
  return kept;
}

}  // namespace resdiff
