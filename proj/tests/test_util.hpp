// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "resdiff/rng.hpp"
#include "resdiff/tensor.hpp"

namespace testutil {

inline std::string data_path(const std::string& rel) {
  return std::string(RESDIFF_TEST_DATA) + "/" + rel;
}

// Rows of a comma-separated file, header skipped.
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

inline resdiff::ImageTensor random_tensor(int c, int h, int w, std::uint64_t seed,
                                          resdiff::ValueRange range = resdiff::kSignedRange) {
  resdiff::ImageTensor t(c, h, w, range);
  resdiff::RngState rng(seed);
  for (float& v : t.data())
    v = static_cast<float>(range.lo + (range.hi - range.lo) * rng.uniform());
  return t;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("resdiff_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
