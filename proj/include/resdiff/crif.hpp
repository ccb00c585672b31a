// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "resdiff/tensor.hpp"

namespace resdiff {

// Native tensor file, little-endian:
//   "CRIF" | u16 version | u16 channels | u32 height | u32 width |
//   f32 payload in [c][y][x] order.
// The value range is not stored; dataset files hold intensities in [0, 1]
// and label maps as integral floats.
inline constexpr char kCrifMagic[4] = {'C', 'R', 'I', 'F'};
inline constexpr std::uint16_t kCrifVersion = 1;
inline constexpr std::size_t kCrifHeaderBytes = 16;

std::vector<std::uint8_t> encode_crif(const ImageTensor& t);
ImageTensor decode_crif(std::span<const std::uint8_t> bytes, ValueRange range = kUnitRange);

void write_crif(const std::string& path, const ImageTensor& t);
ImageTensor read_crif(const std::string& path, ValueRange range = kUnitRange);

// 16-bit grayscale PNG of one channel, mapping [lo, hi] onto [0, 65535].
void write_png16(const std::string& path, std::span<const float> plane, int height, int width,
                 float lo, float hi);

// Reads an 8- or 16-bit grayscale PNG. Intensities are scaled to [0, 1]
// unless `raw` is set, in which case the stored integers are returned
// (used for label images).
ImageTensor read_png_gray(const std::string& path, bool raw = false);

}  // namespace resdiff
