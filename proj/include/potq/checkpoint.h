/* Copyright 2026 The PotQ Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef POTQ_CHECKPOINT_H_
#define POTQ_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "potq/model.h"

namespace potq {

// Float checkpoint, little-endian:
//   "PQC1" | u16 version | u32 len | architecture text | u32 len | input shape text
//   then every parameter in Model::parameters() order: u32 count | f32[count]
inline constexpr char kCheckpointMagic[4] = {'P', 'Q', 'C', '1'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
// FormatError on bad magic, version, truncation or size mismatch.
Model deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const Model& model);
Model read_checkpoint(const std::filesystem::path& path);

}  // namespace potq

#endif  // POTQ_CHECKPOINT_H_
