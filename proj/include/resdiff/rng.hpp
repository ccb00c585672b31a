// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace resdiff {

// Seeded random stream. Identical seed and call sequence give identical
// draws; the full state can be serialized for checkpoint resume.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  // Number of draws taken so far.
  std::uint64_t position() const { return position_; }

  double normal();
  double uniform();  // [0, 1)
  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Independent child stream, e.g. one per generated record.
  RngState substream(std::uint64_t index) const;

  std::string serialize() const;
  static RngState deserialize(const std::string& text);

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// SplitMix64 finalizer; used to derive well-mixed seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace resdiff
