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

#ifndef POTQ_PACKED_MODEL_H_
#define POTQ_PACKED_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "potq/quantized_model.h"
#include "potq/quantizers.h"

namespace potq {

// PackedModel binary layout, version 1. All integers little-endian.
//
//   header   "PQT1" | u16 version | u16 layer_count | u16 C | u16 H | u16 W
//   layer    u8 kind, then by kind:
//              conv    u16 filters | u16 in_channels | u8 kernel | u8 stride | u8 padding
//              fc      u16 outputs | u32 inputs
//              maxpool u8 window
//              gain    u32 channels | f32[channels]
//              relu, flatten: nothing
//            conv and fc continue with the weight block:
//              u8 scheme (0 float, 1 uniform, 2 pot, 3 apot) | u8 bits | i8 fsr_exp
//              u8 flags (bit 0: zero map follows the payload)
//              f32 scale | f32 activation_scale (0 = uncalibrated)
//              u32 payload_bytes | payload | [zero map] | f32[outputs] bias
//
// Payload: one fixed-width field per weight, packed densely, least
// significant bit first within each byte, padded to a byte boundary.
// Field bit 0 is the sign (1 = negative); the code follows in bits 1..:
//   uniform  level magnitude; zero is magnitude 0 with sign 0
//   pot      exponent code; a pruned weight is written as the all-ones code
//            with sign 0 and flagged in the zero map, since every code is
//            also a valid level
//   apot     bits 1-2 first-term code, bits 3-4 second-term code (3 = no
//            term); zero is both terms absent
//   float    IEEE-754 single bits
// Zero map: one bit per weight (1 = zero), same bit order as the payload.
inline constexpr char kPackedMagic[4] = {'P', 'Q', 'T', '1'};
inline constexpr std::uint16_t kPackedVersion = 1;

struct PackedLayer {
  std::vector<std::uint8_t> payload;
  std::vector<std::uint8_t> zero_map;  // empty when not needed
};

PackedLayer encode_layer(const QuantizedLayer& q);
QuantizedLayer decode_layer(const QuantScheme& scheme, const Shape& shape, float scale,
                            std::span<const std::uint8_t> payload,
                            std::span<const std::uint8_t> zero_map);

std::vector<std::uint8_t> serialize_packed_model(const QuantizedModel& model);
// FormatError on bad magic, unknown version or truncated data.
QuantizedModel deserialize_packed_model(std::span<const std::uint8_t> bytes);

void write_packed_model(const std::filesystem::path& path, const QuantizedModel& model);
QuantizedModel read_packed_model(const std::filesystem::path& path);

struct SizeReport {
  std::size_t packed_bytes = 0;
  std::size_t baseline_bytes = 0;
  double compression_ratio = 0.0;  // packed / baseline
  double zero_fraction = 0.0;
  std::size_t weight_count = 0;
};

// Serialized size against the same model with every weighted layer packed
// at `baseline_bits` per weight. InputError for a model without weights.
SizeReport model_size_report(const QuantizedModel& model, int baseline_bits = 8);
// Size of the serialized model; `bits_override` repacks every weighted
// layer at that width instead of its own.
std::size_t packed_model_size(const QuantizedModel& model, std::optional<int> bits_override = {});

struct TrafficReport {
  std::size_t words_read = 0;
  std::size_t baseline_words = 0;  // same weights packed at 8 bits
  double transactions_vs_8bit_ratio = 0.0;
};

// Memory words needed to stream every weight once. Fields never straddle
// words when at least one fits in a word.
TrafficReport memory_traffic_report(const QuantizedModel& model, int word_bits = 32);
std::size_t words_for_layer(std::size_t weights, int field_bits, int word_bits);

std::string size_report_csv(const SizeReport& size, const TrafficReport& traffic);

}  // namespace potq

#endif  // POTQ_PACKED_MODEL_H_
