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

#include "potq/packed_model.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "potq/errors.h"

namespace potq {

namespace {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void i8(std::int8_t v) { out_.push_back(static_cast<std::uint8_t>(v)); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v & 0xff));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
  std::uint16_t u16() {
    const std::uint16_t lo = u8();
    return static_cast<std::uint16_t>(lo | (std::uint16_t{u8()} << 8));
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto out = in_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw FormatError("packed model is truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint16_t narrow16(std::size_t v, const char* what) {
  if (v > 0xffff) throw InputError(std::string(what) + " does not fit the packed format");
  return static_cast<std::uint16_t>(v);
}

std::uint8_t narrow8(std::size_t v, const char* what) {
  if (v > 0xff) throw InputError(std::string(what) + " does not fit the packed format");
  return static_cast<std::uint8_t>(v);
}

std::size_t payload_size(std::size_t weights, int field_bits) {
  return (weights * static_cast<std::size_t>(field_bits) + 7) / 8;
}

void put_bits(std::vector<std::uint8_t>& out, std::size_t bit_pos, std::uint32_t value, int width) {
  for (int j = 0; j < width; ++j) {
    if ((value >> j) & 1u) out[(bit_pos + j) / 8] |= static_cast<std::uint8_t>(1u << ((bit_pos + j) % 8));
  }
}

std::uint32_t get_bits(std::span<const std::uint8_t> in, std::size_t bit_pos, int width) {
  std::uint32_t v = 0;
  for (int j = 0; j < width; ++j) {
    const std::size_t g = bit_pos + j;
    if ((in[g / 8] >> (g % 8)) & 1u) v |= 1u << j;
  }
  return v;
}

std::uint8_t scheme_tag(const QuantScheme& s) { return static_cast<std::uint8_t>(s.index()); }

QuantScheme scheme_from_tag(std::uint8_t tag, std::uint8_t bits, std::int8_t fsr) {
  QuantScheme s;
  switch (tag) {
    case 0: s = FloatScheme{}; break;
    case 1: s = UniformScheme{bits}; break;
    case 2: s = PotScheme{bits, fsr}; break;
    case 3: s = ApotScheme{bits, 2}; break;
    default: throw FormatError("unknown scheme tag " + std::to_string(tag));
  }
  try {
    validate_scheme(s);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid scheme in packed model: ") + e.what());
  }
  return s;
}

std::uint8_t scheme_bits(const QuantScheme& s) {
  if (const auto* u = std::get_if<UniformScheme>(&s)) return static_cast<std::uint8_t>(u->bits);
  if (const auto* p = std::get_if<PotScheme>(&s)) return static_cast<std::uint8_t>(p->bits);
  if (const auto* a = std::get_if<ApotScheme>(&s)) return static_cast<std::uint8_t>(a->bits);
  return 32;
}

std::int8_t scheme_fsr(const QuantScheme& s) {
  if (const auto* p = std::get_if<PotScheme>(&s)) return static_cast<std::int8_t>(p->fsr_exp);
  return 0;
}

void write_model(ByteWriter& w, const QuantizedModel& m, std::optional<int> bits_override) {
  w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kPackedMagic), 4));
  w.u16(kPackedVersion);
  w.u16(narrow16(m.layers.size(), "layer count"));
  w.u16(narrow16(m.input.channels, "input channels"));
  w.u16(narrow16(m.input.height, "input height"));
  w.u16(narrow16(m.input.width, "input width"));
  std::size_t wi = 0, gi = 0;
  for (const LayerSpec& l : m.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    switch (l.kind) {
      case LayerKind::kConv2d:
      case LayerKind::kLinear: {
        if (wi >= m.weights.size()) throw InputError("model has fewer weight blocks than layers");
        const QuantizedLayer& q = m.weights[wi];
        if (l.kind == LayerKind::kConv2d) {
          w.u16(narrow16(q.shape.at(0), "filters"));
          w.u16(narrow16(q.shape.at(1), "input channels"));
          w.u8(narrow8(l.kernel, "kernel"));
          w.u8(narrow8(l.stride, "stride"));
          w.u8(narrow8(l.padding, "padding"));
        } else {
          w.u16(narrow16(q.shape.at(0), "outputs"));
          w.u32(static_cast<std::uint32_t>(q.shape.at(1)));
        }
        w.u8(scheme_tag(q.scheme));
        w.u8(scheme_bits(q.scheme));
        w.i8(scheme_fsr(q.scheme));
        if (bits_override) {
          w.u8(0);
          w.f32(q.scale);
          w.f32(m.activation_scales.empty() ? 0.0f : m.activation_scales[wi]);
          const std::size_t n = payload_size(q.size(), *bits_override);
          w.u32(static_cast<std::uint32_t>(n));
          w.bytes(std::vector<std::uint8_t>(n, 0));
        } else {
          const PackedLayer p = encode_layer(q);
          w.u8(p.zero_map.empty() ? 0 : 1);
          w.f32(q.scale);
          w.f32(m.activation_scales.empty() ? 0.0f : m.activation_scales[wi]);
          w.u32(static_cast<std::uint32_t>(p.payload.size()));
          w.bytes(p.payload);
          w.bytes(p.zero_map);
        }
        for (float b : m.biases.at(wi)) w.f32(b);
        ++wi;
        break;
      }
      case LayerKind::kMaxPool: w.u8(narrow8(l.pool, "pool window")); break;
      case LayerKind::kGain: {
        const auto& g = m.gains.at(gi++);
        w.u32(static_cast<std::uint32_t>(g.size()));
        for (float v : g) w.f32(v);
        break;
      }
      case LayerKind::kRelu:
      case LayerKind::kFlatten:
        break;
    }
  }
}

}  // namespace

PackedLayer encode_layer(const QuantizedLayer& q) {
  const int fw = field_width(q.scheme);
  const std::size_t n = q.size();
  PackedLayer out;
  out.payload.assign(payload_size(n, fw), 0);
  const bool pot = std::holds_alternative<PotScheme>(q.scheme);
  if (pot && q.zero_count() > 0) out.zero_map.assign((n + 7) / 8, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t field = 0;
    if (is_float(q.scheme)) {
      field = std::bit_cast<std::uint32_t>(q.float_values[i]);
    } else if (q.zero_mask[i]) {
      if (pot) {
        field = static_cast<std::uint32_t>(pot_max_code(std::get<PotScheme>(q.scheme).bits)) << 1;
        put_bits(out.zero_map, i, 1, 1);
      } else if (std::holds_alternative<ApotScheme>(q.scheme)) {
        field = (std::uint32_t{kApotAbsent} << 1) | (std::uint32_t{kApotAbsent} << 3);
      }
    } else {
      const std::uint32_t sign = q.signs[i] < 0 ? 1u : 0u;
      if (std::holds_alternative<ApotScheme>(q.scheme)) {
        field = sign | (std::uint32_t{q.codes[i]} << 1) | (std::uint32_t{q.codes2[i]} << 3);
      } else {
        field = sign | (std::uint32_t{q.codes[i]} << 1);
      }
    }
    put_bits(out.payload, i * static_cast<std::size_t>(fw), field, fw);
  }
  return out;
}

QuantizedLayer decode_layer(const QuantScheme& scheme, const Shape& shape, float scale,
                            std::span<const std::uint8_t> payload,
                            std::span<const std::uint8_t> zero_map) {
  const int fw = field_width(scheme);
  const std::size_t n = shape_numel(shape);
  if (payload.size() != payload_size(n, fw)) {
    throw FormatError("payload holds " + std::to_string(payload.size()) + " bytes, expected " +
                      std::to_string(payload_size(n, fw)));
  }
  if (!zero_map.empty() && zero_map.size() != (n + 7) / 8) throw FormatError("bad zero map size");
  QuantizedLayer q;
  q.scheme = scheme;
  q.shape = shape;
  q.scale = scale;
  q.zero_mask.assign(n, 0);
  if (is_float(scheme)) {
    q.float_values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      q.float_values[i] = std::bit_cast<float>(get_bits(payload, i * 32, 32));
      q.zero_mask[i] = q.float_values[i] == 0.0f ? 1 : 0;
    }
    return q;
  }
  q.signs.assign(n, 1);
  q.codes.assign(n, 0);
  const bool apot = std::holds_alternative<ApotScheme>(scheme);
  if (apot) q.codes2.assign(n, 0);
  const int max_uniform = std::holds_alternative<UniformScheme>(scheme)
                              ? (1 << (std::get<UniformScheme>(scheme).bits - 1)) - 1
                              : 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t field = get_bits(payload, i * static_cast<std::size_t>(fw), fw);
    const std::int8_t sign = (field & 1u) ? -1 : 1;
    if (apot) {
      const auto a = static_cast<std::uint8_t>((field >> 1) & 3u);
      const auto b = static_cast<std::uint8_t>((field >> 3) & 3u);
      q.codes[i] = a;
      q.codes2[i] = b;
      if (a == kApotAbsent && b == kApotAbsent) {
        q.zero_mask[i] = 1;
      } else {
        q.signs[i] = sign;
      }
      continue;
    }
    const auto code = static_cast<std::uint8_t>(field >> 1);
    const bool zero = std::holds_alternative<PotScheme>(scheme)
                          ? (!zero_map.empty() && get_bits(zero_map, i, 1))
                          : code == 0;
    if (zero) {
      q.zero_mask[i] = 1;
      continue;
    }
    if (max_uniform && code > max_uniform) throw FormatError("uniform level out of range");
    q.signs[i] = sign;
    q.codes[i] = code;
  }
  return q;
}

std::vector<std::uint8_t> serialize_packed_model(const QuantizedModel& model) {
  ByteWriter w;
  write_model(w, model, std::nullopt);
  return w.take();
}

std::size_t packed_model_size(const QuantizedModel& model, std::optional<int> bits_override) {
  ByteWriter w;
  write_model(w, model, bits_override);
  return w.take().size();
}

QuantizedModel deserialize_packed_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kPackedMagic, 4) != 0) throw FormatError("bad magic, not a PQT1 model");
  const std::uint16_t version = r.u16();
  if (version != kPackedVersion) {
    throw FormatError("unsupported packed model version " + std::to_string(version));
  }
  QuantizedModel m;
  const std::uint16_t layer_count = r.u16();
  m.input.channels = r.u16();
  m.input.height = r.u16();
  m.input.width = r.u16();
  for (std::uint16_t i = 0; i < layer_count; ++i) {
    LayerSpec spec;
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::kGain)) {
      throw FormatError("unknown layer kind " + std::to_string(kind));
    }
    spec.kind = static_cast<LayerKind>(kind);
    Shape shape;
    switch (spec.kind) {
      case LayerKind::kConv2d: {
        const std::size_t filters = r.u16(), in = r.u16();
        spec.kernel = r.u8();
        spec.stride = r.u8();
        spec.padding = r.u8();
        spec.out = filters;
        shape = {filters, in, spec.kernel, spec.kernel};
        break;
      }
      case LayerKind::kLinear: {
        const std::size_t out = r.u16();
        const std::size_t in = r.u32();
        spec.out = out;
        shape = {out, in};
        break;
      }
      case LayerKind::kMaxPool: spec.pool = r.u8(); break;
      case LayerKind::kGain: {
        const std::uint32_t channels = r.u32();
        std::vector<float> g(channels);
        for (float& v : g) v = r.f32();
        m.gains.push_back(std::move(g));
        break;
      }
      case LayerKind::kRelu:
      case LayerKind::kFlatten:
        break;
    }
    if (spec.has_weights()) {
      for (std::size_t d : shape) {
        if (d == 0) throw FormatError("zero-sized weight tensor");
      }
      const std::uint8_t tag = r.u8();
      const std::uint8_t bits = r.u8();
      const std::int8_t fsr = r.i8();
      const std::uint8_t flags = r.u8();
      const QuantScheme scheme = scheme_from_tag(tag, bits, fsr);
      const float scale = r.f32();
      const float act_scale = r.f32();
      const std::uint32_t payload_bytes = r.u32();
      const auto payload = r.bytes(payload_bytes);
      const std::size_t n = shape_numel(shape);
      const auto zero_map = (flags & 1u) ? r.bytes((n + 7) / 8) : std::span<const std::uint8_t>{};
      m.weights.push_back(decode_layer(scheme, shape, scale, payload, zero_map));
      m.activation_scales.push_back(act_scale);
      std::vector<float> bias(shape[0]);
      for (float& b : bias) b = r.f32();
      m.biases.push_back(std::move(bias));
    }
    m.layers.push_back(spec);
  }
  if (!r.done()) throw FormatError("trailing bytes after the last layer");
  try {
    resolve_weight_layers(m.layers, m.input);
  } catch (const Error& e) {
    throw FormatError(std::string("inconsistent architecture: ") + e.what());
  }
  return m;
}

void write_packed_model(const std::filesystem::path& path, const QuantizedModel& model) {
  const auto bytes = serialize_packed_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

QuantizedModel read_packed_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_packed_model(bytes);
}

SizeReport model_size_report(const QuantizedModel& model, int baseline_bits) {
  if (model.weights.empty()) throw InputError("size report: model has no weighted layers");
  if (baseline_bits <= 0) throw InputError("baseline bits must be positive");
  SizeReport r;
  r.packed_bytes = packed_model_size(model);
  r.baseline_bytes = packed_model_size(model, baseline_bits);
  r.compression_ratio = static_cast<double>(r.packed_bytes) / static_cast<double>(r.baseline_bytes);
  r.zero_fraction = model.zero_fraction();
  r.weight_count = model.weight_count();
  return r;
}

std::size_t words_for_layer(std::size_t weights, int field_bits, int word_bits) {
  if (field_bits <= 0 || word_bits <= 0) throw InputError("bit widths must be positive");
  const std::size_t per_word = static_cast<std::size_t>(word_bits / field_bits);
  if (per_word == 0) {
    return (weights * static_cast<std::size_t>(field_bits) + word_bits - 1) / word_bits;
  }
  return (weights + per_word - 1) / per_word;
}

TrafficReport memory_traffic_report(const QuantizedModel& model, int word_bits) {
  if (model.weights.empty()) throw InputError("traffic report: model has no weighted layers");
  TrafficReport r;
  for (const QuantizedLayer& q : model.weights) {
    r.words_read += words_for_layer(q.size(), field_width(q.scheme), word_bits);
    r.baseline_words += words_for_layer(q.size(), 8, word_bits);
  }
  r.transactions_vs_8bit_ratio =
      static_cast<double>(r.words_read) / static_cast<double>(r.baseline_words);
  return r;
}

std::string size_report_csv(const SizeReport& s, const TrafficReport& t) {
  std::ostringstream os;
  os << "packed_bytes,baseline_bytes,compression_ratio,zero_fraction,weight_count,words_read,"
        "baseline_words,transactions_vs_8bit_ratio\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f,%.6f,%zu,%zu,%zu,%.6f\n", s.packed_bytes,
                s.baseline_bytes, s.compression_ratio, s.zero_fraction, s.weight_count, t.words_read,
                t.baseline_words, t.transactions_vs_8bit_ratio);
  os << buf;
  return os.str();
}

}  // namespace potq
