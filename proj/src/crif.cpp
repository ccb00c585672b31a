// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/crif.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>

namespace resdiff {

namespace {

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <class U>
U get_le(std::span<const std::uint8_t> b, std::size_t pos) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= std::uint64_t(b[pos + i]) << (8 * i);
  return static_cast<U>(v);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::vector<std::uint8_t> encode_crif(const ImageTensor& t) {
  if (t.channels() > 0xffff) throw std::invalid_argument("CRIF supports at most 65535 channels");
  std::vector<std::uint8_t> out;
  out.reserve(kCrifHeaderBytes + 4 * t.size());
  out.insert(out.end(), kCrifMagic, kCrifMagic + 4);
  put_le<std::uint16_t>(out, kCrifVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.channels()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.height()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.width()));
  for (float v : t.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

ImageTensor decode_crif(std::span<const std::uint8_t> bytes, ValueRange range) {
  if (bytes.size() < kCrifHeaderBytes || !std::equal(kCrifMagic, kCrifMagic + 4, bytes.begin()))
    throw std::runtime_error("not a CRIF tensor");
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kCrifVersion)
    throw std::runtime_error("unsupported CRIF version " + std::to_string(version));
  const int c = get_le<std::uint16_t>(bytes, 6);
  const auto h = get_le<std::uint32_t>(bytes, 8);
  const auto w = get_le<std::uint32_t>(bytes, 12);
  const std::uint64_t count = std::uint64_t(c) * h * w;
  if (bytes.size() != kCrifHeaderBytes + 4 * count)
    throw std::runtime_error("CRIF payload size does not match header");
  ImageTensor t(c, static_cast<int>(h), static_cast<int>(w), range);
  auto d = t.data();
  for (std::size_t i = 0; i < count; ++i)
    d[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kCrifHeaderBytes + 4 * i));
  return t;
}

void write_crif(const std::string& path, const ImageTensor& t) {
  const auto bytes = encode_crif(t);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
}

ImageTensor read_crif(const std::string& path, ValueRange range) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_crif(bytes, range);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_png16(const std::string& path, std::span<const float> plane, int height, int width,
                 float lo, float hi) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialization failed");
  }
  std::vector<png_byte> row(std::size_t(width) * 2);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng error writing " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const double scale = hi > lo ? 65535.0 / (double(hi) - lo) : 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double v = (double(plane[std::size_t(y) * width + x]) - lo) * scale;
      const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 65535.0)));
      row[2 * std::size_t(x)] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
      row[2 * std::size_t(x) + 1] = static_cast<png_byte>(q & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageTensor read_png_gray(const std::string& path, bool raw) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialization failed");
  }
  ImageTensor out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng error reading " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_swap(png);  // little-endian 16-bit rows
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int out_depth = png_get_bit_depth(png, info);
  std::vector<png_byte> row(png_get_rowbytes(png, info));
  out = ImageTensor(1, h, w, kUnitRange);
  const double maxv = out_depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) {
      double v;
      if (out_depth == 16)
        v = double(row[2 * std::size_t(x)] | (row[2 * std::size_t(x) + 1] << 8));
      else
        v = double(row[std::size_t(x)]);
      out.at(0, y, x) = static_cast<float>(raw ? v : v / maxv);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace resdiff
