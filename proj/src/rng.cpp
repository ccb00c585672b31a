// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace resdiff {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngState::RngState(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed)) {}

double RngState::normal() {
  ++position_;
  return normal_(engine_);
}

double RngState::uniform() {
  ++position_;
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

std::int64_t RngState::uniform_int(std::int64_t lo, std::int64_t hi) {
  ++position_;
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
}

RngState RngState::substream(std::uint64_t index) const {
  return RngState(mix_seed(seed_ ^ mix_seed(index + 0x5851f42d4c957f2dULL)));
}

std::string RngState::serialize() const {
  std::ostringstream os;
  os << seed_ << ' ' << position_ << ' ' << engine_ << ' ' << normal_;
  return os.str();
}

RngState RngState::deserialize(const std::string& text) {
  std::istringstream is(text);
  RngState r;
  is >> r.seed_ >> r.position_ >> r.engine_ >> r.normal_;
  if (!is) throw std::runtime_error("corrupt rng state");
  return r;
}

}  // namespace resdiff
