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

#include "potq/qinference.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "potq/errors.h"
#include "potq/ops.h"

namespace potq {

namespace {

constexpr std::size_t kEvalBatch = 256;
constexpr int kApotUnitShift = 5;  // 32 integer units per normalized 1.0

std::size_t argmax_row(std::span<const float> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

void check_input(const QuantizedModel& model, const Tensor& x) {
  if (x.rank() != 4 || x.dim(1) != model.input.channels || x.dim(2) != model.input.height ||
      x.dim(3) != model.input.width) {
    throw DimensionError("model expects [N," + format_input_shape(model.input) + "], got " +
                         shape_to_string(x.shape()));
  }
}

// One weighted layer lowered to per-output rows of (input offset, code).
struct IntegerLayer {
  MacConfig config;
  double weight_scale = 1.0;
  std::vector<std::vector<std::size_t>> offsets;
  std::vector<std::vector<WeightCode>> codes;
  std::vector<std::vector<std::int64_t>> decoded;
  std::int64_t masked = 0;
};

IntegerLayer lower_layer(const QuantizedLayer& q, const IntegerOptions& opts) {
  IntegerLayer L;
  L.config = MacConfig::nominal(*mac_kind_for(q.scheme), opts.overflow);
  if (opts.intermediate_width) L.config.intermediate_width = *opts.intermediate_width;
  if (opts.accumulator_width) L.config.accumulator_width = *opts.accumulator_width;
  L.weight_scale = integer_weight_scale(q);
  const std::size_t rows = q.shape[0];
  const std::size_t per_row = q.size() / rows;
  L.offsets.resize(rows);
  L.codes.resize(rows);
  L.decoded.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < per_row; ++j) {
      const auto code = weight_code(q, r * per_row + j);
      if (!code) {
        ++L.masked;
        continue;
      }
      L.offsets[r].push_back(j);
      L.codes[r].push_back(*code);
      L.decoded[r].push_back(code->decoded(L.config.kind));
    }
  }
  return L;
}

struct ActQuantizer {
  double scale = 1.0;
  std::int64_t qmax = 127;

  std::int64_t operator()(float v, IntegerStats& stats) const {
    const double r = std::round(static_cast<double>(v) / scale);
    if (r > static_cast<double>(qmax) || r < -static_cast<double>(qmax)) {
      ++stats.activation_clamps;
      return r > 0 ? qmax : -qmax;
    }
    return static_cast<std::int64_t>(r);
  }
};

// Integer dot product of one output row against gathered activations.
std::int64_t row_dot(const IntegerLayer& L, std::size_t row, std::span<const std::int64_t> patch,
                     const IntegerOptions& opts, std::vector<std::int8_t>& scratch,
                     IntegerStats& stats) {
  const auto& offs = L.offsets[row];
  stats.macs += static_cast<std::int64_t>(offs.size());
  if (opts.wide_datapath) {
    std::int64_t acc = 0;
    const auto& dec = L.decoded[row];
    for (std::size_t j = 0; j < offs.size(); ++j) acc += patch[offs[j]] * dec[j];
    return acc;
  }
  scratch.resize(offs.size());
  for (std::size_t j = 0; j < offs.size(); ++j) scratch[j] = static_cast<std::int8_t>(patch[offs[j]]);
  const MacResult m = mac_dot(L.config, scratch, L.codes[row]);
  stats.intermediate_events += m.intermediate_events;
  stats.accumulator_events += m.accumulator_events;
  return m.value;
}

Tensor integer_layer(const Tensor& h, const LayerSpec& spec, const QuantizedLayer& q,
                     std::span<const float> bias, const Tensor* gain, float act_scale,
                     const IntegerOptions& opts, IntegerStats& stats) {
  const IntegerLayer L = lower_layer(q, opts);
  ActQuantizer aq;
  aq.qmax = (std::int64_t{1} << (opts.act_bits - 1)) - 1;
  aq.scale = static_cast<double>(act_scale) * 127.0 / static_cast<double>(aq.qmax);
  const std::size_t n = h.dim(0);
  const std::size_t rows = q.shape[0];
  std::vector<double> out_scale(rows), out_bias(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = gain ? static_cast<double>(gain->data()[r]) : 1.0;
    out_scale[r] = fold_scale(g, aq.scale * L.weight_scale);
    out_bias[r] = g * static_cast<double>(bias[r]);
  }
  std::vector<std::int8_t> scratch;
  std::vector<std::int64_t> qin(h.numel());
  for (std::size_t i = 0; i < qin.size(); ++i) qin[i] = aq(h.data()[i], stats);
  stats.skipped_zero_weights += L.masked * static_cast<std::int64_t>(n);

  if (spec.kind == LayerKind::kLinear) {
    const std::size_t in = h.numel() / n;
    if (in != q.shape[1]) throw DimensionError("fc expects " + std::to_string(q.shape[1]) + " inputs");
    std::vector<float> out(n * rows);
    for (std::size_t s = 0; s < n; ++s) {
      std::span<const std::int64_t> patch(qin.data() + s * in, in);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::int64_t acc = row_dot(L, r, patch, opts, scratch, stats);
        out[s * rows + r] = static_cast<float>(out_scale[r] * static_cast<double>(acc) + out_bias[r]);
      }
    }
    return Tensor::from_data({n, rows}, std::move(out));
  }

  const std::size_t c = h.dim(1), ih = h.dim(2), iw = h.dim(3);
  const std::size_t k = q.shape[2];
  if (c != q.shape[1]) throw DimensionError("conv expects " + std::to_string(q.shape[1]) + " channels");
  const Conv2dGeometry geo{spec.stride, spec.padding};
  const std::size_t oh = conv_output_extent(ih, k, geo), ow = conv_output_extent(iw, k, geo);
  std::vector<float> out(n * rows * oh * ow);
  std::vector<std::int64_t> patch(c * k * k);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t p = 0;
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx, ++p) {
              const auto yy = static_cast<std::ptrdiff_t>(y * spec.stride + ky) -
                              static_cast<std::ptrdiff_t>(spec.padding);
              const auto xx = static_cast<std::ptrdiff_t>(x * spec.stride + kx) -
                              static_cast<std::ptrdiff_t>(spec.padding);
              const bool inside = yy >= 0 && xx >= 0 && yy < static_cast<std::ptrdiff_t>(ih) &&
                                  xx < static_cast<std::ptrdiff_t>(iw);
              patch[p] = inside ? qin[((s * c + ch) * ih + static_cast<std::size_t>(yy)) * iw +
                                      static_cast<std::size_t>(xx)]
                                : 0;
            }
          }
        }
        for (std::size_t r = 0; r < rows; ++r) {
          const std::int64_t acc = row_dot(L, r, patch, opts, scratch, stats);
          out[((s * rows + r) * oh + y) * ow + x] =
              static_cast<float>(out_scale[r] * static_cast<double>(acc) + out_bias[r]);
        }
      }
    }
  }
  return Tensor::from_data({n, rows, oh, ow}, std::move(out));
}

Tensor float_layer(const Tensor& h, const LayerSpec& spec, const QuantizedLayer& q,
                   std::span<const float> bias) {
  const Tensor w = dequantize(q);
  const Tensor b = Tensor::from_data({bias.size()}, std::vector<float>(bias.begin(), bias.end()));
  return spec.kind == LayerKind::kConv2d ? conv2d(h, w, b, {spec.stride, spec.padding})
                                         : linear(h, w, b);
}

Tensor gain_tensor(const std::vector<float>& g) { return Tensor::from_data({g.size()}, g); }

}  // namespace

IntegerStats& IntegerStats::operator+=(const IntegerStats& o) {
  macs += o.macs;
  skipped_zero_weights += o.skipped_zero_weights;
  intermediate_events += o.intermediate_events;
  accumulator_events += o.accumulator_events;
  activation_clamps += o.activation_clamps;
  return *this;
}

std::optional<MacKind> mac_kind_for(const QuantScheme& scheme) {
  if (const auto* p = std::get_if<PotScheme>(&scheme)) {
    if (p->bits > 4) throw InputError("the shift datapath takes PoT weights of at most 4 bits");
    return MacKind::kPot4x8;
  }
  if (const auto* u = std::get_if<UniformScheme>(&scheme)) {
    return u->bits <= 4 ? MacKind::kUniform4x8 : MacKind::kUniform8x8;
  }
  if (std::holds_alternative<ApotScheme>(scheme)) return MacKind::kApot4x8;
  return std::nullopt;
}

double integer_weight_scale(const QuantizedLayer& q) {
  const double sf = q.scale;
  if (const auto* p = std::get_if<PotScheme>(&q.scheme)) {
    return std::ldexp(sf, p->fsr_exp - pot_max_code(p->bits));
  }
  if (const auto* u = std::get_if<UniformScheme>(&q.scheme)) {
    return sf / static_cast<double>((1 << (u->bits - 1)) - 1);
  }
  if (std::holds_alternative<ApotScheme>(q.scheme)) {
    return sf / (kApotNorm * static_cast<double>(1 << kApotUnitShift));
  }
  return 1.0;
}

std::optional<WeightCode> weight_code(const QuantizedLayer& q, std::size_t i) {
  if (is_float(q.scheme)) throw InputError("float layers have no integer weight codes");
  if (q.zero_mask[i]) return std::nullopt;
  const int sign = q.signs[i];
  if (const auto* p = std::get_if<PotScheme>(&q.scheme)) {
    return WeightCode::pot(sign, pot_max_code(p->bits) - q.codes[i]);
  }
  if (std::holds_alternative<UniformScheme>(q.scheme)) return WeightCode::uniform(sign, q.codes[i]);
  const auto term = [](std::uint8_t code, int exps_base) -> std::optional<int> {
    if (code == kApotAbsent) return std::nullopt;
    return exps_base - 2 * code;
  };
  // 2^-e scaled by 2^5: first terms 2^0,2^-2,2^-4 -> shifts 5,3,1;
  // second terms 2^-1,2^-3,2^-5 -> shifts 4,2,0.
  return WeightCode::apot(sign, term(q.codes[i], kApotUnitShift),
                          term(q.codes2[i], kApotUnitShift - 1));
}

ActQuantParams calibrate(const QuantizedModel& model, const Tensor& batch) {
  check_input(model, batch);
  const Model fm = to_float_model(model);
  ActQuantParams p;
  Tensor h = batch;
  std::size_t wi = 0, gi = 0;
  for (const LayerSpec& l : model.layers) {
    switch (l.kind) {
      case LayerKind::kConv2d:
      case LayerKind::kLinear: {
        float m = 0.0f;
        for (float v : h.data()) m = std::max(m, std::fabs(v));
        p.scales.push_back(m > 0.0f ? m / 127.0f : 1.0f / 127.0f);
        h = l.kind == LayerKind::kConv2d
                ? conv2d(h, fm.weights()[wi], fm.biases()[wi], {l.stride, l.padding})
                : linear(h, fm.weights()[wi], fm.biases()[wi]);
        ++wi;
        break;
      }
      case LayerKind::kRelu: h = relu(h); break;
      case LayerKind::kMaxPool: h = max_pool2d(h, l.pool); break;
      case LayerKind::kFlatten: h = flatten(h); break;
      case LayerKind::kGain: h = channel_scale(h, fm.gains()[gi++]); break;
    }
  }
  return p;
}

void calibrate_model(QuantizedModel& model, const Tensor& batch) {
  model.activation_scales = calibrate(model, batch).scales;
}

Tensor forward_quantized(const QuantizedModel& model, const Tensor& x, InferencePath path,
                         const IntegerOptions& options, IntegerStats* stats) {
  check_input(model, x);
  if (path == InferencePath::kFloat) return to_float_model(model).forward(x);
  if (!model.calibrated()) throw StateError("integer inference needs calibrated activation scales");
  if (options.act_bits < 2 || options.act_bits > 24) throw InputError("act_bits must be in 2..24");
  if (options.act_bits != 8 && !options.wide_datapath) {
    throw InputError("the MAC emulator takes 8-bit activations; use the wide datapath");
  }
  IntegerStats local;
  Tensor h = x;
  std::size_t wi = 0, gi = 0;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const LayerSpec& l = model.layers[li];
    switch (l.kind) {
      case LayerKind::kConv2d:
      case LayerKind::kLinear: {
        const QuantizedLayer& q = model.weights[wi];
        if (is_float(q.scheme)) {
          h = float_layer(h, l, q, model.biases[wi]);
        } else {
          const bool fold = li + 1 < model.layers.size() &&
                            model.layers[li + 1].kind == LayerKind::kGain;
          const Tensor g = fold ? gain_tensor(model.gains[gi]) : Tensor();
          h = integer_layer(h, l, q, model.biases[wi], fold ? &g : nullptr,
                            model.activation_scales[wi], options, local);
          if (fold) {
            ++gi;
            ++li;
          }
        }
        ++wi;
        break;
      }
      case LayerKind::kRelu: h = relu(h); break;
      case LayerKind::kMaxPool: h = max_pool2d(h, l.pool); break;
      case LayerKind::kFlatten: h = flatten(h); break;
      case LayerKind::kGain: h = channel_scale(h, gain_tensor(model.gains[gi++])); break;
    }
  }
  if (stats) *stats += local;
  return h;
}

EvalResult evaluate_quantized(const QuantizedModel& model, const Dataset& data, InferencePath path,
                              const IntegerOptions& options, IntegerStats* stats) {
  if (path == InferencePath::kFloat) return evaluate_model(to_float_model(model), data);
  if (data.size() == 0) throw InputError("evaluate: empty dataset");
  if (data.shape != model.input) throw DimensionError("evaluate: dataset shape mismatch");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < idx.size(); start += kEvalBatch) {
    const std::size_t n = std::min(kEvalBatch, idx.size() - start);
    std::span<const std::size_t> batch(idx.data() + start, n);
    const Tensor logits = forward_quantized(model, data.batch_images(batch), path, options, stats);
    const std::vector<int> labels = data.batch_labels(batch);
    loss += static_cast<double>(cross_entropy(logits, labels).item()) * static_cast<double>(n);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = logits.data().subspan(i * k, k);
      if (argmax_row(row) == static_cast<std::size_t>(labels[i])) ++correct;
    }
  }
  return {loss / static_cast<double>(data.size()),
          static_cast<double>(correct) / static_cast<double>(data.size())};
}

}  // namespace potq
