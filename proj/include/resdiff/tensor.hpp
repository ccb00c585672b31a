// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace resdiff {

struct ValueRange {
  float lo = 0.0f;
  float hi = 1.0f;
  bool operator==(const ValueRange&) const = default;
};

inline constexpr ValueRange kUnitRange{0.0f, 1.0f};
inline constexpr ValueRange kSignedRange{-1.0f, 1.0f};
inline constexpr ValueRange kByteRange{0.0f, 255.0f};

// C x H x W image, row-major [c][y][x]. The value range is metadata that
// says how pixel values are to be interpreted; it is not enforced on every
// write.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int channels, int height, int width, ValueRange range = kUnitRange,
              float fill = 0.0f);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  ValueRange range() const { return range_; }
  void set_range(ValueRange r) { range_ = r; }

  float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::span<float> channel(int c);
  std::span<const float> channel(int c) const;

  bool same_shape(const ImageTensor& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }
  bool all_finite() const;
  std::string shape_string() const;

  // Affine remap of values from the current range to `target`.
  ImageTensor remapped(ValueRange target) const;
  ImageTensor clamped() const;
  // Channels [first, first + count).
  ImageTensor slice(int first, int count) const;
  // Single-channel tensor repeated `count` times.
  ImageTensor replicated(int count) const;

  bool operator==(const ImageTensor& o) const {
    return same_shape(o) && range_ == o.range_ && data_ == o.data_;
  }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  ValueRange range_ = kUnitRange;
  std::vector<float> data_;
};

// Channel-wise concatenation; ranges must agree.
ImageTensor concat_channels(const ImageTensor& a, const ImageTensor& b);

// Throws std::invalid_argument naming `what` when shapes differ.
void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what);

}  // namespace resdiff
