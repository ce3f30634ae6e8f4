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

#ifndef POTQ_QUANTIZERS_H_
#define POTQ_QUANTIZERS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "potq/tensor.h"

namespace potq {

// Bit widths count the sign bit: a b-bit scheme has b-1 magnitude bits.
struct FloatScheme {
  bool operator==(const FloatScheme&) const = default;
};
struct UniformScheme {
  int bits = 8;
  bool operator==(const UniformScheme&) const = default;
};
struct PotScheme {
  int bits = 4;
  int fsr_exp = 0;  // exponent of the largest level; 0 after normalization
  bool operator==(const PotScheme&) const = default;
};
// Two power-of-two terms per weight: 2^-a + 2^-b with a in {0,2,4},
// b in {1,3,5}, either term optionally absent, normalized so the largest
// level is 1.
struct ApotScheme {
  int bits = 4;
  int terms = 2;
  bool operator==(const ApotScheme&) const = default;
};

using QuantScheme = std::variant<FloatScheme, UniformScheme, PotScheme, ApotScheme>;

// "float", "uniform<b>", "pot<b>", "pot<b>:fsr=<e>", "apot4".
QuantScheme parse_scheme(std::string_view text);
std::string format_scheme(const QuantScheme& scheme);
// Throws ConfigError on an unsupported bit width.
void validate_scheme(const QuantScheme& scheme);
bool is_float(const QuantScheme& scheme);
// Width of one packed weight field: sign plus code bits (32 for float).
int field_width(const QuantScheme& scheme);

struct PruneConfig {
  double pf = 0.0;  // pruning factor, >= 0
};

// APoT term code meaning "term not present".
inline constexpr std::uint8_t kApotAbsent = 3;
inline constexpr int kApotTermCodes = 4;
// Exponents of the first and second APoT terms, by code (0..2).
inline constexpr int kApotFirstExp[3] = {0, 2, 4};
inline constexpr int kApotSecondExp[3] = {1, 3, 5};
// Raw sum of the largest two terms, 2^0 + 2^-1.
inline constexpr double kApotNorm = 1.5;

// Quantized weights of one layer. For PoT, code c encodes the normalized
// magnitude 2^(fsr_exp - c); for uniform, code is the integer level
// magnitude; for APoT, codes/codes2 are the two term codes. Masked weights
// are exactly zero.
struct QuantizedLayer {
  QuantScheme scheme;
  Shape shape;
  float scale = 1.0f;  // SF = max |w|
  std::vector<std::int8_t> signs;
  std::vector<std::uint8_t> codes;
  std::vector<std::uint8_t> codes2;
  std::vector<std::uint8_t> zero_mask;
  std::vector<float> float_values;  // FloatScheme only

  std::size_t size() const { return shape_numel(shape); }
  std::size_t zero_count() const;
  double zero_fraction() const;
  bool operator==(const QuantizedLayer&) const = default;
};

// max |w|, or 1.0 when every weight is zero. Empty input is an InputError.
float compute_scale(std::span<const float> w);
float compute_scale(const Tensor& w);

int pot_max_code(int bits);
int pot_min_exponent(const PotScheme& scheme);

// Code for one normalized weight: round-half-away-from-zero of log2|x|,
// clipped to [fsr_exp - 2^(bits-1) + 1, fsr_exp] (small magnitudes go to
// the minimum level). nullopt for x == 0.
std::optional<int> logquant_exponent(double x_norm, int bits, int fsr_exp);

QuantizedLayer quantize_pot(const Tensor& w, const PotScheme& scheme, PruneConfig prune = {});
QuantizedLayer quantize_uniform(const Tensor& w, int bits);
QuantizedLayer quantize_apot(const Tensor& w, const ApotScheme& scheme = {});
// Dispatches on the scheme; PruneConfig only affects PoT.
QuantizedLayer quantize(const Tensor& w, const QuantScheme& scheme, PruneConfig prune = {});

Tensor dequantize(const QuantizedLayer& q);
void dequantize_into(const QuantizedLayer& q, std::span<float> out);

// Normalized magnitude of an APoT code pair.
double apot_magnitude(std::uint8_t first, std::uint8_t second);

// Every representable normalized value, zero included, ascending.
std::vector<double> quant_levels(const QuantScheme& scheme);

}  // namespace potq

#endif  // POTQ_QUANTIZERS_H_
