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

#include "potq/shift_mac.h"

#include <cstdio>
#include <sstream>

#include "potq/errors.h"

namespace potq {

namespace {

void check_sign(int sign) {
  if (sign != 1 && sign != -1) throw InputError("weight sign must be +1 or -1");
}

void check_shift(int k) {
  if (k < 0 || k > 7) throw InputError("shift amount must be in [0,7], got " + std::to_string(k));
}

ProductResult finish(std::int64_t exact, const MacConfig& config) {
  ProductResult r;
  r.exact = exact;
  r.value = reduce_to_width(exact, config.intermediate_width, config.overflow, &r.clamped);
  return r;
}

// Sign correction: negate the shifted partial product for a negative weight.
std::int64_t sign_correct(std::int64_t shifted, int sign) { return sign < 0 ? -shifted : shifted; }

int max_uniform_magnitude(MacKind kind) { return kind == MacKind::kUniform4x8 ? 7 : 127; }

}  // namespace

std::string_view mac_kind_name(MacKind kind) {
  switch (kind) {
    case MacKind::kUniform8x8: return "Uniform 8x8";
    case MacKind::kUniform4x8: return "Uniform 4x8";
    case MacKind::kPot4x8: return "PoT 4x8";
    case MacKind::kApot4x8: return "APoT 4x8";
  }
  return "?";
}

MacKind parse_mac_kind(std::string_view text) {
  if (text == "uniform8x8") return MacKind::kUniform8x8;
  if (text == "uniform4x8") return MacKind::kUniform4x8;
  if (text == "pot4x8") return MacKind::kPot4x8;
  if (text == "apot4x8") return MacKind::kApot4x8;
  throw ConfigError("unknown MAC kind '" + std::string(text) + "'");
}

OverflowMode parse_overflow_mode(std::string_view text) {
  if (text == "wrap") return OverflowMode::kWrap;
  if (text == "saturate") return OverflowMode::kSaturate;
  throw ConfigError("unknown overflow mode '" + std::string(text) + "' (expected wrap or saturate)");
}

std::string_view to_string(OverflowMode mode) {
  return mode == OverflowMode::kWrap ? "wrap" : "saturate";
}

MacConfig MacConfig::nominal(MacKind kind, OverflowMode overflow) {
  if (kind == MacKind::kUniform8x8) return {kind, 16, 24, overflow};
  return {kind, 12, 16, overflow};
}

WeightCode WeightCode::uniform(int sign, int magnitude) {
  check_sign(sign);
  if (magnitude < 0 || magnitude > 127) throw InputError("uniform magnitude out of range");
  WeightCode c;
  c.sign = static_cast<std::int8_t>(sign);
  c.magnitude = static_cast<std::int16_t>(magnitude);
  return c;
}

WeightCode WeightCode::pot(int sign, int k) {
  check_sign(sign);
  check_shift(k);
  WeightCode c;
  c.sign = static_cast<std::int8_t>(sign);
  c.shift = static_cast<std::int8_t>(k);
  return c;
}

WeightCode WeightCode::apot(int sign, std::optional<int> k1, std::optional<int> k2) {
  check_sign(sign);
  if (k1) check_shift(*k1);
  if (k2) check_shift(*k2);
  WeightCode c;
  c.sign = static_cast<std::int8_t>(sign);
  c.shift = k1 ? static_cast<std::int8_t>(*k1) : kAbsentShift;
  c.shift2 = k2 ? static_cast<std::int8_t>(*k2) : kAbsentShift;
  return c;
}

std::int64_t WeightCode::decoded(MacKind kind) const {
  switch (kind) {
    case MacKind::kUniform8x8:
    case MacKind::kUniform4x8:
      return sign * std::int64_t{magnitude};
    case MacKind::kPot4x8:
      return sign * (std::int64_t{1} << shift);
    case MacKind::kApot4x8: {
      std::int64_t m = 0;
      if (shift != kAbsentShift) m += std::int64_t{1} << shift;
      if (shift2 != kAbsentShift) m += std::int64_t{1} << shift2;
      return sign * m;
    }
  }
  return 0;
}

std::int64_t reduce_to_width(std::int64_t value, int width, OverflowMode mode, bool* changed) {
  if (width < 2 || width > 62) throw InputError("register width must be in [2,62]");
  const std::int64_t lo = -(std::int64_t{1} << (width - 1));
  const std::int64_t hi = (std::int64_t{1} << (width - 1)) - 1;
  std::int64_t out = value;
  if (value < lo || value > hi) {
    if (mode == OverflowMode::kSaturate) {
      out = value < lo ? lo : hi;
    } else {
      const std::uint64_t mask = (std::uint64_t{1} << width) - 1;
      const std::uint64_t bits = static_cast<std::uint64_t>(value) & mask;
      out = static_cast<std::int64_t>(bits);
      if (out > hi) out -= std::int64_t{1} << width;
    }
  }
  if (changed) *changed = out != value;
  return out;
}

ProductResult shift_mul_pot(std::int8_t act, int sign, int k, const MacConfig& config) {
  check_sign(sign);
  check_shift(k);
  const std::int64_t shifted = static_cast<std::int64_t>(act) << k;
  return finish(sign_correct(shifted, sign), config);
}

ProductResult shift_mul_apot(std::int8_t act, int sign, std::optional<int> k1,
                             std::optional<int> k2, const MacConfig& config) {
  check_sign(sign);
  std::int64_t partial = 0;
  if (k1) {
    check_shift(*k1);
    partial += static_cast<std::int64_t>(act) << *k1;
  }
  if (k2) {
    check_shift(*k2);
    partial += static_cast<std::int64_t>(act) << *k2;
  }
  return finish(sign_correct(partial, sign), config);
}

ProductResult uniform_mul(std::int8_t act, int sign, int magnitude, const MacConfig& config) {
  check_sign(sign);
  if (magnitude < 0 || magnitude > max_uniform_magnitude(config.kind)) {
    throw InputError("uniform weight magnitude " + std::to_string(magnitude) + " exceeds " +
                     std::string(mac_kind_name(config.kind)));
  }
  return finish(static_cast<std::int64_t>(act) * (sign * magnitude), config);
}

ProductResult mac_product(std::int8_t act, const WeightCode& code, const MacConfig& config) {
  switch (config.kind) {
    case MacKind::kUniform8x8:
    case MacKind::kUniform4x8:
      return uniform_mul(act, code.sign, code.magnitude, config);
    case MacKind::kPot4x8:
      return shift_mul_pot(act, code.sign, code.shift, config);
    case MacKind::kApot4x8: {
      const auto opt = [](std::int8_t k) {
        return k == kAbsentShift ? std::nullopt : std::optional<int>(k);
      };
      return shift_mul_apot(act, code.sign, opt(code.shift), opt(code.shift2), config);
    }
  }
  throw InputError("unknown MAC kind");
}

MacResult mac_dot(const MacConfig& config, std::span<const std::int8_t> acts,
                  std::span<const WeightCode> codes) {
  if (acts.size() != codes.size()) {
    throw InputError("mac_dot: " + std::to_string(acts.size()) + " activations for " +
                     std::to_string(codes.size()) + " weights");
  }
  MacResult r;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    const ProductResult p = mac_product(acts[i], codes[i], config);
    if (p.clamped) ++r.intermediate_events;
    bool changed = false;
    r.value = reduce_to_width(r.value + p.value, config.accumulator_width, config.overflow, &changed);
    if (changed) ++r.accumulator_events;
    r.exact += p.exact;
  }
  return r;
}

HwCostEntry cost_report(MacKind kind) {
  switch (kind) {
    case MacKind::kUniform8x8: return {kind, 87, 39, 1.0, 1.0};
    case MacKind::kUniform4x8: return {kind, 46, 27, 1.0 / 2.5, 1.0 / 1.7};
    case MacKind::kApot4x8: return {kind, 55, 49, 1.0 / 3.0, 1.0 / 1.3};
    case MacKind::kPot4x8: return {kind, 39, 25, 1.0 / 6.0, 1.0 / 2.0};
  }
  throw InputError("unknown MAC kind");
}

std::vector<HwCostEntry> cost_table() {
  std::vector<HwCostEntry> out;
  for (MacKind k : kAllMacKinds) out.push_back(cost_report(k));
  return out;
}

std::string format_cost_table_csv() {
  std::ostringstream os;
  os << "kind, lut, ff, rel_power, rel_area\n";
  char buf[128];
  for (const HwCostEntry& e : cost_table()) {
    std::snprintf(buf, sizeof(buf), "%s, %d, %d, %.3f, %.3f\n", std::string(mac_kind_name(e.kind)).c_str(),
                  e.lut, e.ff, e.rel_power, e.rel_area);
    os << buf;
  }
  return os.str();
}

namespace {

// Wide-integer reference: the product through a plain multiply, and whether
// the nominal intermediate register can hold it.
void check_case(std::int8_t act, const WeightCode& code, MacKind kind, SelfCheckResult& r) {
  const MacConfig wide{kind, 32, 40, OverflowMode::kWrap};
  const MacConfig nominal = MacConfig::nominal(kind);
  const std::int64_t expected = static_cast<std::int64_t>(act) * code.decoded(kind);
  const ProductResult w = mac_product(act, code, wide);
  const ProductResult n = mac_product(act, code, nominal);
  const std::int64_t lim = std::int64_t{1} << (nominal.intermediate_width - 1);
  const bool fits = expected >= -lim && expected < lim;
  ++r.cases;
  if (w.value != expected || w.exact != expected || w.clamped || n.exact != expected ||
      n.clamped == fits || (fits && n.value != expected)) {
    ++r.mismatches;
  }
}

}  // namespace

SelfCheckResult run_mac_self_check() {
  SelfCheckResult r;
  for (int a = -128; a <= 127; ++a) {
    const auto act = static_cast<std::int8_t>(a);
    for (int sign : {1, -1}) {
      for (int k = 0; k <= 7; ++k) {
        check_case(act, WeightCode::pot(sign, k), MacKind::kPot4x8, r);
        ++r.pot_cases;
      }
      for (int k1 = -1; k1 <= 7; ++k1) {
        for (int k2 = -1; k2 <= 7; ++k2) {
          const auto t1 = k1 < 0 ? std::nullopt : std::optional<int>(k1);
          const auto t2 = k2 < 0 ? std::nullopt : std::optional<int>(k2);
          check_case(act, WeightCode::apot(sign, t1, t2), MacKind::kApot4x8, r);
          ++r.apot_cases;
        }
      }
      for (int m = 0; m <= 7; ++m) {
        check_case(act, WeightCode::uniform(sign, m), MacKind::kUniform4x8, r);
        ++r.uniform_cases;
      }
      for (int m = 0; m <= 127; ++m) {
        check_case(act, WeightCode::uniform(sign, m), MacKind::kUniform8x8, r);
        ++r.uniform_cases;
      }
    }
  }
  return r;
}

}  // namespace potq
