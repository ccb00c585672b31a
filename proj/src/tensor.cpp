// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace resdiff {

ImageTensor::ImageTensor(int channels, int height, int width, ValueRange range, float fill)
    : channels_(channels), height_(height), width_(width), range_(range) {
  if (channels < 0 || height < 0 || width < 0)
    throw std::invalid_argument("negative tensor dimension");
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

std::span<float> ImageTensor::channel(int c) {
  return std::span<float>(data_).subspan(static_cast<std::size_t>(c) * plane_size(), plane_size());
}

std::span<const float> ImageTensor::channel(int c) const {
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(c) * plane_size(),
                                               plane_size());
}

bool ImageTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

std::string ImageTensor::shape_string() const {
  return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
}

ImageTensor ImageTensor::remapped(ValueRange target) const {
  ImageTensor out = *this;
  out.range_ = target;
  const double scale = (double(target.hi) - target.lo) / (double(range_.hi) - range_.lo);
  for (float& v : out.data_) v = static_cast<float>(target.lo + (double(v) - range_.lo) * scale);
  return out;
}

ImageTensor ImageTensor::clamped() const {
  ImageTensor out = *this;
  for (float& v : out.data_) v = std::clamp(v, range_.lo, range_.hi);
  return out;
}

ImageTensor ImageTensor::slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > channels_)
    throw std::invalid_argument("channel slice out of range");
  ImageTensor out(count, height_, width_, range_);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * plane_size()),
              count * plane_size(), out.data_.begin());
  return out;
}

ImageTensor ImageTensor::replicated(int count) const {
  if (channels_ != 1) throw std::invalid_argument("replicated() needs a single-channel tensor");
  ImageTensor out(count, height_, width_, range_);
  for (int c = 0; c < count; ++c) std::copy(data_.begin(), data_.end(), out.channel(c).begin());
  return out;
}

ImageTensor concat_channels(const ImageTensor& a, const ImageTensor& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument("concat_channels: spatial sizes differ");
  if (!(a.range() == b.range())) throw std::invalid_argument("concat_channels: ranges differ");
  ImageTensor out(a.channels() + b.channels(), a.height(), a.width(), a.range());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.size());
  return out;
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
}

}  // namespace resdiff
