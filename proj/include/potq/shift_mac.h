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

#ifndef POTQ_SHIFT_MAC_H_
#define POTQ_SHIFT_MAC_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace potq {

enum class MacKind : std::uint8_t {
  kUniform8x8 = 0,
  kUniform4x8 = 1,
  kPot4x8 = 2,
  kApot4x8 = 3,
};

inline constexpr MacKind kAllMacKinds[] = {MacKind::kUniform8x8, MacKind::kUniform4x8,
                                           MacKind::kApot4x8, MacKind::kPot4x8};

std::string_view mac_kind_name(MacKind kind);  // "Uniform 8x8", ...
MacKind parse_mac_kind(std::string_view text);  // "uniform8x8", "pot4x8", ...

enum class OverflowMode : std::uint8_t {
  kWrap = 0,      // two's complement
  kSaturate = 1,  // clamp to the representable range
};

OverflowMode parse_overflow_mode(std::string_view text);
std::string_view to_string(OverflowMode mode);

struct MacConfig {
  MacKind kind = MacKind::kPot4x8;
  int intermediate_width = 12;
  int accumulator_width = 16;
  OverflowMode overflow = OverflowMode::kWrap;

  // Widths of the synthesized units: 16-bit product / 24-bit accumulator
  // for 8x8, 12 / 16 for every 4x8 design.
  static MacConfig nominal(MacKind kind, OverflowMode overflow = OverflowMode::kWrap);
};

inline constexpr std::int8_t kAbsentShift = -1;

// One weight as the datapath sees it. Uniform kinds use `magnitude`
// (sign-magnitude); PoT uses `shift`; APoT uses `shift` and `shift2`, either
// of which may be kAbsentShift.
struct WeightCode {
  std::int8_t sign = 1;
  std::int16_t magnitude = 0;
  std::int8_t shift = kAbsentShift;
  std::int8_t shift2 = kAbsentShift;

  static WeightCode uniform(int sign, int magnitude);
  static WeightCode pot(int sign, int k);
  static WeightCode apot(int sign, std::optional<int> k1, std::optional<int> k2);

  // The integer the code stands for.
  std::int64_t decoded(MacKind kind) const;
};

// Two's-complement reduction (wrap) or clamp (saturate) of `value` into a
// signed `width`-bit register. `changed` reports whether the value moved.
std::int64_t reduce_to_width(std::int64_t value, int width, OverflowMode mode, bool* changed);

struct ProductResult {
  std::int64_t exact = 0;  // product before any width reduction
  std::int64_t value = 0;  // product as stored in the intermediate register
  bool clamped = false;    // value != exact
};

// sign * (act << k).
ProductResult shift_mul_pot(std::int8_t act, int sign, int k, const MacConfig& config);
// sign * ((act << k1) + (act << k2)); absent terms contribute 0.
ProductResult shift_mul_apot(std::int8_t act, int sign, std::optional<int> k1,
                             std::optional<int> k2, const MacConfig& config);
// act * (sign * magnitude) on a regular multiplier.
ProductResult uniform_mul(std::int8_t act, int sign, int magnitude, const MacConfig& config);
// Dispatches on config.kind.
ProductResult mac_product(std::int8_t act, const WeightCode& code, const MacConfig& config);

struct MacResult {
  std::int64_t value = 0;                // final accumulator register
  std::int64_t exact = 0;                // wide-integer sum of exact products
  std::int64_t intermediate_events = 0;  // products that did not fit
  std::int64_t accumulator_events = 0;   // accumulate steps that did not fit
};

// Sequential multiply-accumulate of acts[i] * codes[i]; the accumulator is
// reduced to accumulator_width after every step. InputError when the lists
// differ in length.
MacResult mac_dot(const MacConfig& config, std::span<const std::int8_t> acts,
                  std::span<const WeightCode> codes);

struct HwCostEntry {
  MacKind kind = MacKind::kUniform8x8;
  int lut = 0;
  int ff = 0;
  double rel_power = 1.0;  // relative to Uniform 8x8
  double rel_area = 1.0;   // relative to Uniform 8x8
};

// Post-synthesis figures of the four MAC designs.
HwCostEntry cost_report(MacKind kind);
std::vector<HwCostEntry> cost_table();
// "kind, lut, ff, rel_power, rel_area" rows with a header line.
std::string format_cost_table_csv();

struct SelfCheckResult {
  std::int64_t cases = 0;
  std::int64_t mismatches = 0;
  std::int64_t pot_cases = 0;
  std::int64_t apot_cases = 0;
  std::int64_t uniform_cases = 0;
  bool passed() const { return mismatches == 0 && cases > 0; }
};

// Every 8-bit activation against every weight code of the shift-based and
// uniform designs, checked against plain integer multiplication of the
// decoded weight.
SelfCheckResult run_mac_self_check();

}  // namespace potq

#endif  // POTQ_SHIFT_MAC_H_
