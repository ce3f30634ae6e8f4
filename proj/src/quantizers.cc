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

#include "potq/quantizers.h"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "potq/errors.h"

namespace potq {

namespace {

int parse_int(std::string_view s, std::string_view context) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("bad integer in scheme '" + std::string(context) + "'");
  }
  return value;
}

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

QuantizedLayer empty_layer(const Tensor& w, QuantScheme scheme) {
  QuantizedLayer q;
  q.scheme = std::move(scheme);
  q.shape = w.shape();
  const std::size_t n = w.numel();
  q.signs.assign(n, 1);
  q.codes.assign(n, 0);
  q.zero_mask.assign(n, 0);
  return q;
}

}  // namespace

QuantScheme parse_scheme(std::string_view text) {
  QuantScheme scheme;
  if (text == "float") {
    scheme = FloatScheme{};
  } else if (text.starts_with("uniform")) {
    scheme = UniformScheme{parse_int(text.substr(7), text)};
  } else if (text.starts_with("apot")) {
    scheme = ApotScheme{parse_int(text.substr(4), text), 2};
  } else if (text.starts_with("pot")) {
    std::string_view rest = text.substr(3);
    PotScheme pot;
    const auto colon = rest.find(':');
    pot.bits = parse_int(rest.substr(0, colon), text);
    if (colon != std::string_view::npos) {
      std::string_view opt = rest.substr(colon + 1);
      if (!opt.starts_with("fsr=")) throw ConfigError("unknown pot option in '" + std::string(text) + "'");
      pot.fsr_exp = parse_int(opt.substr(4), text);
    }
    scheme = pot;
  } else {
    throw ConfigError("unknown quantization scheme '" + std::string(text) + "'");
  }
  validate_scheme(scheme);
  return scheme;
}

std::string format_scheme(const QuantScheme& scheme) {
  return std::visit(Overloaded{
                        [](const FloatScheme&) { return std::string("float"); },
                        [](const UniformScheme& s) { return "uniform" + std::to_string(s.bits); },
                        [](const PotScheme& s) {
                          std::string out = "pot" + std::to_string(s.bits);
                          if (s.fsr_exp != 0) out += ":fsr=" + std::to_string(s.fsr_exp);
                          return out;
                        },
                        [](const ApotScheme& s) { return "apot" + std::to_string(s.bits); },
                    },
                    scheme);
}

void validate_scheme(const QuantScheme& scheme) {
  std::visit(Overloaded{
                 [](const FloatScheme&) {},
                 [](const UniformScheme& s) {
                   if (s.bits < 2 || s.bits > 8) throw ConfigError("uniform bits must be in 2..8");
                 },
                 [](const PotScheme& s) {
                   if (s.bits < 2 || s.bits > 8) throw ConfigError("pot bits must be in 2..8");
                 },
                 [](const ApotScheme& s) {
                   if (s.bits != 4 || s.terms != 2) {
                     throw ConfigError("apot supports only 4 bits with 2 terms");
                   }
                 },
             },
             scheme);
}

bool is_float(const QuantScheme& scheme) { return std::holds_alternative<FloatScheme>(scheme); }

int field_width(const QuantScheme& scheme) {
  return std::visit(Overloaded{
                        [](const FloatScheme&) { return 32; },
                        [](const UniformScheme& s) { return s.bits; },
                        [](const PotScheme& s) { return s.bits; },
                        // sign + two 2-bit term codes
                        [](const ApotScheme&) { return 5; },
                    },
                    scheme);
}

std::size_t QuantizedLayer::zero_count() const {
  return static_cast<std::size_t>(std::count(zero_mask.begin(), zero_mask.end(), 1));
}

double QuantizedLayer::zero_fraction() const {
  const std::size_t n = size();
  return n == 0 ? 0.0 : static_cast<double>(zero_count()) / static_cast<double>(n);
}

float compute_scale(std::span<const float> w) {
  if (w.empty()) throw InputError("compute_scale: empty tensor");
  float m = 0.0f;
  for (float v : w) m = std::max(m, std::fabs(v));
  return m > 0.0f ? m : 1.0f;
}

float compute_scale(const Tensor& w) { return compute_scale(w.data()); }

int pot_max_code(int bits) { return (1 << (bits - 1)) - 1; }

int pot_min_exponent(const PotScheme& scheme) {
  return scheme.fsr_exp - pot_max_code(scheme.bits);
}

std::optional<int> logquant_exponent(double x_norm, int bits, int fsr_exp) {
  if (x_norm == 0.0) return std::nullopt;
  const int max_code = pot_max_code(bits);
  // std::round rounds half away from zero.
  const double e = std::round(std::log2(std::fabs(x_norm)));
  const double lo = fsr_exp - max_code;
  const double clipped = std::clamp(e, lo, static_cast<double>(fsr_exp));
  return fsr_exp - static_cast<int>(clipped);
}

QuantizedLayer quantize_pot(const Tensor& w, const PotScheme& scheme, PruneConfig prune) {
  validate_scheme(scheme);
  if (prune.pf < 0.0) throw InputError("pruning factor must be non-negative");
  QuantizedLayer q = empty_layer(w, scheme);
  q.scale = compute_scale(w);
  const double sf = q.scale;
  const double threshold = prune.pf * std::ldexp(1.0, pot_min_exponent(scheme));
  auto wd = w.data();
  for (std::size_t i = 0; i < wd.size(); ++i) {
    const double wn = wd[i] / sf;
    q.signs[i] = wn < 0.0 ? -1 : 1;
    // Pruning looks at the normalized magnitude before quantization.
    if (std::fabs(wn) <= threshold) {
      q.zero_mask[i] = 1;
      q.signs[i] = 1;
      continue;
    }
    const auto code = logquant_exponent(wn, scheme.bits, scheme.fsr_exp);
    if (!code) {
      q.zero_mask[i] = 1;
      q.signs[i] = 1;
      continue;
    }
    q.codes[i] = static_cast<std::uint8_t>(*code);
  }
  return q;
}

QuantizedLayer quantize_uniform(const Tensor& w, int bits) {
  const UniformScheme scheme{bits};
  validate_scheme(scheme);
  QuantizedLayer q = empty_layer(w, scheme);
  q.scale = compute_scale(w);
  const int max_level = (1 << (bits - 1)) - 1;
  const double step = static_cast<double>(q.scale) / max_level;
  auto wd = w.data();
  for (std::size_t i = 0; i < wd.size(); ++i) {
    const double level = std::clamp(std::round(wd[i] / step), -static_cast<double>(max_level),
                                    static_cast<double>(max_level));
    if (level == 0.0) {
      q.zero_mask[i] = 1;
      continue;
    }
    q.signs[i] = level < 0.0 ? -1 : 1;
    q.codes[i] = static_cast<std::uint8_t>(std::fabs(level));
  }
  return q;
}

double apot_magnitude(std::uint8_t first, std::uint8_t second) {
  double raw = 0.0;
  if (first != kApotAbsent) raw += std::ldexp(1.0, -kApotFirstExp[first]);
  if (second != kApotAbsent) raw += std::ldexp(1.0, -kApotSecondExp[second]);
  return raw / kApotNorm;
}

QuantizedLayer quantize_apot(const Tensor& w, const ApotScheme& scheme) {
  validate_scheme(scheme);
  QuantizedLayer q = empty_layer(w, scheme);
  q.codes2.assign(q.codes.size(), 0);
  q.scale = compute_scale(w);

  struct Entry {
    double magnitude;
    std::uint8_t first, second;
  };
  std::vector<Entry> book;
  for (std::uint8_t a = 0; a < kApotTermCodes; ++a) {
    for (std::uint8_t b = 0; b < kApotTermCodes; ++b) book.push_back({apot_magnitude(a, b), a, b});
  }
  std::sort(book.begin(), book.end(),
            [](const Entry& x, const Entry& y) { return x.magnitude < y.magnitude; });

  const double sf = q.scale;
  auto wd = w.data();
  for (std::size_t i = 0; i < wd.size(); ++i) {
    const double wn = wd[i] / sf;
    const double mag = std::fabs(wn);
    // Nearest magnitude; ties resolve toward the smaller magnitude.
    auto it = std::lower_bound(book.begin(), book.end(), mag,
                               [](const Entry& e, double m) { return e.magnitude < m; });
    const Entry* best = it == book.end() ? &book.back() : &*it;
    if (it != book.begin()) {
      const Entry* below = &*(it - 1);
      if (it == book.end() || mag - below->magnitude <= best->magnitude - mag) best = below;
    }
    q.codes[i] = best->first;
    q.codes2[i] = best->second;
    if (best->magnitude == 0.0) {
      q.zero_mask[i] = 1;
    } else {
      q.signs[i] = wn < 0.0 ? -1 : 1;
    }
  }
  return q;
}

QuantizedLayer quantize(const Tensor& w, const QuantScheme& scheme, PruneConfig prune) {
  return std::visit(Overloaded{
                        [&](const FloatScheme&) {
                          QuantizedLayer q;
                          q.scheme = FloatScheme{};
                          q.shape = w.shape();
                          q.float_values.assign(w.data().begin(), w.data().end());
                          q.zero_mask.assign(w.numel(), 0);
                          for (std::size_t i = 0; i < w.numel(); ++i) {
                            q.zero_mask[i] = w.data()[i] == 0.0f ? 1 : 0;
                          }
                          return q;
                        },
                        [&](const UniformScheme& s) { return quantize_uniform(w, s.bits); },
                        [&](const PotScheme& s) { return quantize_pot(w, s, prune); },
                        [&](const ApotScheme& s) { return quantize_apot(w, s); },
                    },
                    scheme);
}

void dequantize_into(const QuantizedLayer& q, std::span<float> out) {
  const std::size_t n = q.size();
  if (out.size() != n) throw DimensionError("dequantize: output size mismatch");
  if (is_float(q.scheme)) {
    std::copy(q.float_values.begin(), q.float_values.end(), out.begin());
    return;
  }
  const double sf = q.scale;
  for (std::size_t i = 0; i < n; ++i) {
    if (q.zero_mask[i]) {
      out[i] = 0.0f;
      continue;
    }
    double magnitude = 0.0;
    if (const auto* pot = std::get_if<PotScheme>(&q.scheme)) {
      // Exact: a float scaled by a power of two.
      magnitude = std::ldexp(q.scale, pot->fsr_exp - q.codes[i]);
    } else if (const auto* uni = std::get_if<UniformScheme>(&q.scheme)) {
      magnitude = (q.codes[i] * sf) / ((1 << (uni->bits - 1)) - 1);
    } else {
      magnitude = sf * apot_magnitude(q.codes[i], q.codes2[i]);
    }
    out[i] = static_cast<float>(q.signs[i] < 0 ? -magnitude : magnitude);
  }
}

Tensor dequantize(const QuantizedLayer& q) {
  std::vector<float> data(q.size());
  dequantize_into(q, data);
  return Tensor::from_data(q.shape, std::move(data));
}

std::vector<double> quant_levels(const QuantScheme& scheme) {
  std::vector<double> levels{0.0};
  std::visit(Overloaded{
                 [](const FloatScheme&) {
                   throw InputError("quant_levels: float scheme has no discrete levels");
                 },
                 [&](const UniformScheme& s) {
                   const int m = (1 << (s.bits - 1)) - 1;
                   for (int k = 1; k <= m; ++k) {
                     levels.push_back(static_cast<double>(k) / m);
                     levels.push_back(-static_cast<double>(k) / m);
                   }
                 },
                 [&](const PotScheme& s) {
                   for (int c = 0; c <= pot_max_code(s.bits); ++c) {
                     levels.push_back(std::ldexp(1.0, s.fsr_exp - c));
                     levels.push_back(-std::ldexp(1.0, s.fsr_exp - c));
                   }
                 },
                 [&](const ApotScheme&) {
                   for (std::uint8_t a = 0; a < kApotTermCodes; ++a) {
                     for (std::uint8_t b = 0; b < kApotTermCodes; ++b) {
                       const double m = apot_magnitude(a, b);
                       if (m > 0.0) {
                         levels.push_back(m);
                         levels.push_back(-m);
                       }
                     }
                   }
                 },
             },
             scheme);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

}  // namespace potq
