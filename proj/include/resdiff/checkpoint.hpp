// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resdiff/diffusion.hpp"
#include "resdiff/model.hpp"
#include "resdiff/schedule.hpp"
#include "resdiff/train.hpp"

namespace resdiff {

// Binary checkpoint container, little-endian throughout:
//   "RDCK" | u16 version | u16 reserved | u32 json length | JSON config block
//   u32 entry count | per entry: u16 name length, name, u64 count, f32[count]
//   u8 has_optimizer | [f32[P] first moments, f32[P] second moments]
// The JSON block carries the architecture, the schedules and, when present,
// the training step, Adam step and serialized RNG state.
inline constexpr char kCheckpointMagic[4] = {'R', 'D', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  DenoiserParams params;
  ScheduleConfig schedule;
  DdpmConfig ddpm;
  // Present for checkpoints written during training.
  std::optional<TrainState> training;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace resdiff
