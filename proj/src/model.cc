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

#include "potq/model.h"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "potq/errors.h"
#include "potq/ops.h"

namespace potq {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::size_t parse_count(std::string_view s, std::string_view context) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value == 0) {
    throw ConfigError("bad number '" + std::string(s) + "' in '" + std::string(context) + "'");
  }
  return value;
}

std::size_t parse_count_or_zero(std::string_view s, std::string_view context) {
  if (s == "0") return 0;
  return parse_count(s, context);
}

LayerSpec parse_conv(std::string_view token) {
  // conv<K>x<K>:<out>[/s<stride>][/p<pad>]
  LayerSpec spec;
  spec.kind = LayerKind::kConv2d;
  std::string_view rest = token.substr(4);
  const auto colon = rest.find(':');
  if (colon == std::string_view::npos) throw ConfigError("conv layer needs ':<filters>': " + std::string(token));
  std::string_view kernel = rest.substr(0, colon);
  const auto x = kernel.find('x');
  if (x == std::string_view::npos) throw ConfigError("conv kernel must be <K>x<K>: " + std::string(token));
  const std::size_t kh = parse_count(kernel.substr(0, x), token);
  const std::size_t kw = parse_count(kernel.substr(x + 1), token);
  if (kh != kw) throw ConfigError("only square conv kernels are supported: " + std::string(token));
  spec.kernel = kh;
  spec.padding = kh / 2;
  std::string tail(rest.substr(colon + 1));
  std::size_t slash = tail.find('/');
  spec.out = parse_count(tail.substr(0, slash), token);
  while (slash != std::string::npos) {
    tail = tail.substr(slash + 1);
    slash = tail.find('/');
    const std::string opt = tail.substr(0, slash);
    if (opt.size() < 2) throw ConfigError("bad conv option in " + std::string(token));
    if (opt[0] == 's') {
      spec.stride = parse_count(opt.substr(1), token);
    } else if (opt[0] == 'p') {
      spec.padding = parse_count_or_zero(opt.substr(1), token);
    } else {
      throw ConfigError("unknown conv option '" + std::string(opt) + "'");
    }
  }
  return spec;
}

}  // namespace

std::vector<LayerSpec> parse_architecture(std::string_view text) {
  std::vector<LayerSpec> layers;
  bool flat = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    std::string_view token =
        trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    start = comma == std::string_view::npos ? text.size() + 1 : comma + 1;
    if (token.empty()) throw ConfigError("empty layer in architecture '" + std::string(text) + "'");
    LayerSpec spec;
    if (token.starts_with("conv")) {
      if (flat) throw ConfigError("conv layer after flatten");
      spec = parse_conv(token);
    } else if (token == "relu") {
      spec.kind = LayerKind::kRelu;
    } else if (token == "gain") {
      spec.kind = LayerKind::kGain;
    } else if (token == "flatten") {
      spec.kind = LayerKind::kFlatten;
      flat = true;
    } else if (token.starts_with("maxpool")) {
      if (flat) throw ConfigError("maxpool after flatten");
      spec.kind = LayerKind::kMaxPool;
      spec.pool = parse_count(token.substr(7), token);
    } else if (token.starts_with("fc:")) {
      if (!flat) {
        LayerSpec f;
        f.kind = LayerKind::kFlatten;
        layers.push_back(f);
        flat = true;
      }
      spec.kind = LayerKind::kLinear;
      spec.out = parse_count(token.substr(3), token);
    } else {
      throw ConfigError("unknown layer '" + std::string(token) + "'");
    }
    layers.push_back(spec);
  }
  if (layers.empty()) throw ConfigError("architecture has no layers");
  return layers;
}

std::string format_architecture(const std::vector<LayerSpec>& layers) {
  std::ostringstream os;
  bool first = true;
  for (const LayerSpec& l : layers) {
    if (!first) os << ',';
    first = false;
    switch (l.kind) {
      case LayerKind::kConv2d:
        os << "conv" << l.kernel << 'x' << l.kernel << ':' << l.out;
        if (l.stride != 1) os << "/s" << l.stride;
        if (l.padding != l.kernel / 2) os << "/p" << l.padding;
        break;
      case LayerKind::kLinear: os << "fc:" << l.out; break;
      case LayerKind::kRelu: os << "relu"; break;
      case LayerKind::kMaxPool: os << "maxpool" << l.pool; break;
      case LayerKind::kFlatten: os << "flatten"; break;
      case LayerKind::kGain: os << "gain"; break;
    }
  }
  return os.str();
}

InputShape parse_input_shape(std::string_view text) {
  text = trim(text);
  const auto a = text.find('x');
  const auto b = a == std::string_view::npos ? a : text.find('x', a + 1);
  if (a == std::string_view::npos || b == std::string_view::npos) {
    throw ConfigError("input shape must be CxHxW, got '" + std::string(text) + "'");
  }
  return InputShape{parse_count(text.substr(0, a), text), parse_count(text.substr(a + 1, b - a - 1), text),
                    parse_count(text.substr(b + 1), text)};
}

std::string format_input_shape(const InputShape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

std::vector<WeightLayerInfo> resolve_weight_layers(const std::vector<LayerSpec>& layers,
                                                   const InputShape& input,
                                                   std::vector<std::size_t>* gain_channels) {
  std::vector<WeightLayerInfo> out;
  std::size_t c = input.channels, h = input.height, w = input.width;
  bool flat = false;
  std::size_t features = 0;
  int convs = 0, fcs = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::kConv2d: {
        if (flat) throw DimensionError("conv layer after flatten");
        const Conv2dGeometry g{l.stride, l.padding};
        const std::size_t oh = conv_output_extent(h, l.kernel, g);
        const std::size_t ow = conv_output_extent(w, l.kernel, g);
        out.push_back({i, "conv" + std::to_string(++convs), l.kind, {l.out, c, l.kernel, l.kernel},
                       c * l.kernel * l.kernel});
        c = l.out;
        h = oh;
        w = ow;
        break;
      }
      case LayerKind::kMaxPool:
        if (flat || l.pool > h || l.pool > w) {
          throw DimensionError("maxpool" + std::to_string(l.pool) + " does not fit the feature map");
        }
        h /= l.pool;
        w /= l.pool;
        break;
      case LayerKind::kFlatten:
        if (!flat) features = c * h * w;
        flat = true;
        break;
      case LayerKind::kLinear:
        if (!flat) throw DimensionError("fc layer requires a flatten before it");
        out.push_back({i, "fc" + std::to_string(++fcs), l.kind, {l.out, features}, features});
        features = l.out;
        break;
      case LayerKind::kGain:
        if (gain_channels) gain_channels->push_back(flat ? features : c);
        break;
      case LayerKind::kRelu:
        break;
    }
  }
  if (out.empty() || out.back().kind != LayerKind::kLinear) {
    throw DimensionError("architecture must end with an fc layer");
  }
  return out;
}

Model::Model(std::vector<LayerSpec> layers, InputShape input, std::uint64_t seed)
    : layers_(std::move(layers)), input_(input) {
  weight_info_ = resolve_weight_layers(layers_, input_, &gain_channels_);
  std::mt19937_64 rng(seed);
  for (const WeightLayerInfo& info : weight_info_) {
    // Kaiming-uniform for ReLU networks: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
    const float bound = static_cast<float>(std::sqrt(6.0 / static_cast<double>(info.fan_in)));
    std::uniform_real_distribution<float> dist(-bound, bound);
    std::vector<float> w(shape_numel(info.weight_shape));
    for (float& v : w) v = dist(rng);
    weights_.push_back(Tensor::from_data(info.weight_shape, std::move(w), true));
    biases_.push_back(Tensor::zeros({info.weight_shape[0]}, true));
  }
  for (std::size_t ch : gain_channels_) gains_.push_back(Tensor::full({ch}, 1.0f, true));
}

std::size_t Model::num_classes() const { return weight_info_.back().weight_shape[0]; }

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out(weights_);
  out.insert(out.end(), biases_.begin(), biases_.end());
  out.insert(out.end(), gains_.begin(), gains_.end());
  return out;
}

void Model::zero_grad() {
  for (Tensor& t : weights_) t.zero_grad();
  for (Tensor& t : biases_) t.zero_grad();
  for (Tensor& t : gains_) t.zero_grad();
}

Tensor Model::forward(const Tensor& x, std::span<const Tensor> weight_override) const {
  if (!weight_override.empty() && weight_override.size() != weights_.size()) {
    throw DimensionError("weight override has " + std::to_string(weight_override.size()) +
                         " tensors, model has " + std::to_string(weights_.size()));
  }
  if (x.rank() != 4 || x.dim(1) != input_.channels || x.dim(2) != input_.height ||
      x.dim(3) != input_.width) {
    throw DimensionError("model expects [N," + format_input_shape(input_) + "], got " +
                         shape_to_string(x.shape()));
  }
  Tensor h = x;
  std::size_t wi = 0, gi = 0;
  for (const LayerSpec& l : layers_) {
    switch (l.kind) {
      case LayerKind::kConv2d:
      case LayerKind::kLinear: {
        const Tensor& w = weight_override.empty() ? weights_[wi] : weight_override[wi];
        if (w.shape() != weights_[wi].shape()) {
          throw DimensionError("override for " + weight_info_[wi].name + " has shape " +
                               shape_to_string(w.shape()));
        }
        h = l.kind == LayerKind::kConv2d ? conv2d(h, w, biases_[wi], {l.stride, l.padding})
                                         : linear(h, w, biases_[wi]);
        ++wi;
        break;
      }
      case LayerKind::kRelu: h = relu(h); break;
      case LayerKind::kMaxPool: h = max_pool2d(h, l.pool); break;
      case LayerKind::kFlatten: h = flatten(h); break;
      case LayerKind::kGain: h = channel_scale(h, gains_[gi++]); break;
    }
  }
  return h;
}

Model Model::clone() const {
  Model m;
  m.layers_ = layers_;
  m.input_ = input_;
  m.weight_info_ = weight_info_;
  m.gain_channels_ = gain_channels_;
  for (const Tensor& t : weights_) m.weights_.push_back(t.clone(true));
  for (const Tensor& t : biases_) m.biases_.push_back(t.clone(true));
  for (const Tensor& t : gains_) m.gains_.push_back(t.clone(true));
  return m;
}

}  // namespace potq
