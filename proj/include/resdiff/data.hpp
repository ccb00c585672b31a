// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resdiff/tensor.hpp"

namespace resdiff {

// Per-pixel instance labels: 0 is background, 1..K are instances.
struct InstanceMap {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> labels;

  InstanceMap() = default;
  InstanceMap(int h, int w) : height(h), width(w), labels(std::size_t(h) * w, 0) {}

  std::int32_t& at(int y, int x) { return labels[std::size_t(y) * width + x]; }
  std::int32_t at(int y, int x) const { return labels[std::size_t(y) * width + x]; }
  // Largest label (the instance count when labels are contiguous).
  int count() const;
  bool contiguous() const;
  bool operator==(const InstanceMap&) const = default;
};

struct BoundaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BoundaryMask() = default;
  BoundaryMask(int h, int w) : height(h), width(w), bits(std::size_t(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return bits[std::size_t(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return bits[std::size_t(y) * width + x]; }
  bool operator==(const BoundaryMask&) const = default;
};

// Renumbers labels to 1..K in order of first appearance (raster order).
InstanceMap relabel_contiguous(const InstanceMap& m);

// Labels whose pixels do not form a single 4-connected component.
std::vector<int> disconnected_instances(const InstanceMap& m);

// A pixel is on the boundary when one of its 4-neighbours carries a
// different label (background included). Both sides of an edge are marked.
BoundaryMask instances_to_boundary(const InstanceMap& m);

// Thresholds a real-valued channel (values in [0, 1]).
BoundaryMask binarize(std::span<const float> plane, int height, int width, double threshold = 0.5);

struct BoundaryDecodeOptions {
  int min_area = 16;
  // A component touching the image border is background when its area
  // exceeds this fraction of the image.
  double exterior_fraction = 0.25;
  // Boundary pixels 4-adjacent to exactly one surviving component are
  // given back to it, undoing the inner half of the boundary band.
  bool reclaim_boundary = true;
};

// 4-connected labelling of the non-boundary pixels.
InstanceMap boundary_to_instances(const BoundaryMask& b, const BoundaryDecodeOptions& opt = {});

ImageTensor instances_to_tensor(const InstanceMap& m);
InstanceMap tensor_to_instances(const ImageTensor& t);
ImageTensor boundary_to_tensor(const BoundaryMask& b);

inline constexpr std::array<const char*, 5> kFluorescenceChannels = {"DNA", "RNA", "ER", "AGP",
                                                                     "Mito"};
inline constexpr std::array<const char*, 2> kBoundaryChannels = {"nuclei", "cells"};

// One field of view. Intensities are in [0, 1]. `seg` holds the nuclei and
// cell boundary channels; binary for ground truth, real-valued when
// synthesized.
struct SampleRecord {
  std::string id;
  std::string split;
  std::string plate;
  std::string well;
  ImageTensor bf;    // 1 channel
  ImageTensor fluo;  // 5 channels, order of kFluorescenceChannels
  ImageTensor seg;   // 2 channels, order of kBoundaryChannels
  std::optional<InstanceMap> nuclei;
  std::optional<InstanceMap> cells;

  int height() const { return bf.height(); }
  int width() const { return bf.width(); }
  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
  BoundaryMask boundary(int channel, double threshold = 0.5) const;
};

struct SyntheticParams {
  int min_cells = 5;
  int max_cells = 20;
  double cell_radius_min = 7.0;  // semi-axes, px
  double cell_radius_max = 11.0;
  double nucleus_ratio_min = 0.45;  // nucleus semi-axis / cell semi-axis
  double nucleus_ratio_max = 0.6;
  double nucleus_radius_min = 4.0;
  int min_separation = 2;  // background px between cells
  int placement_attempts = 400;
  double if_noise = 0.02;
  double bf_noise = 0.015;
  double agp_rim = 0.18;  // kept weak on purpose

  void validate() const;
};

// One record from its own substream of `seed`; independent of n.
SampleRecord generate_record(std::size_t index, int size, std::uint64_t seed,
                             const SyntheticParams& params = {});

std::vector<SampleRecord> generate_synthetic(std::size_t n, int size, std::uint64_t seed,
                                             const SyntheticParams& params = {});

// Per-channel 16-bit PNG previews next to the tensors.
void write_record_png(const std::string& dir, const SampleRecord& r);

// Writes `<root>/<split>/<id>/...` for every record and `<root>/manifest.tsv`.
void write_dataset(const std::string& root, const std::vector<SampleRecord>& records,
                   bool png = false);

// Reads one record directory. Tensors are taken from .crif files, falling
// back to per-channel PNGs (bf.png, dna.png, rna.png, er.png, agp.png,
// mito.png, nuclei.png / cells.png label images). Without seg.crif the
// boundary channels are derived from the instance maps.
SampleRecord load_record(const std::string& dir, const std::string& id);

struct LoadIssue {
  std::string id;
  std::string message;
};

struct LoadedDataset {
  std::vector<SampleRecord> records;
  std::vector<LoadIssue> errors;    // records that could not be loaded
  std::vector<LoadIssue> warnings;  // loaded, but suspicious
};

// `path` is either a dataset root with manifest.tsv (optionally restricted
// to one split) or a directory whose subdirectories are records.
LoadedDataset load_directory(const std::string& path, const std::string& split = "");

inline constexpr double kBlackThreshold = 1.0 / 255.0;

// True when every fluorescence pixel is below `threshold` of its range.
bool is_black(const ImageTensor& fluo, double threshold = kBlackThreshold);

std::vector<SampleRecord> exclusion_filter(std::vector<SampleRecord> records,
                                           double threshold = kBlackThreshold,
                                           std::vector<std::string>* excluded = nullptr);

}  // namespace resdiff
