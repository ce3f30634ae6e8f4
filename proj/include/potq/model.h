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

#ifndef POTQ_MODEL_H_
#define POTQ_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "potq/tensor.h"

namespace potq {

enum class LayerKind : std::uint8_t {
  kConv2d = 0,
  kLinear = 1,
  kRelu = 2,
  kMaxPool = 3,
  kFlatten = 4,
  kGain = 5,  // per-channel scale, the folded form of batch norm
};

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t out = 0;  // conv filters or linear outputs
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  std::size_t pool = 2;

  bool has_weights() const { return kind == LayerKind::kConv2d || kind == LayerKind::kLinear; }
  bool operator==(const LayerSpec&) const = default;
};

// Per-sample input geometry (channels, height, width).
struct InputShape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t numel() const { return channels * height * width; }
  bool operator==(const InputShape&) const = default;
};

// Parses "conv3x3:16,relu,conv3x3:32/s1/p1,relu,maxpool2,fc:10" into layer
// specs. A flatten is inserted before the first fc when missing.
std::vector<LayerSpec> parse_architecture(std::string_view text);
std::string format_architecture(const std::vector<LayerSpec>& layers);
InputShape parse_input_shape(std::string_view text);  // "1x8x8"
std::string format_input_shape(const InputShape& shape);

// Static shape of one weighted layer, resolved against the input geometry.
struct WeightLayerInfo {
  std::size_t layer_index = 0;  // index into the layer list
  std::string name;             // conv1, conv2, fc1, ...
  LayerKind kind = LayerKind::kConv2d;
  Shape weight_shape;
  std::size_t fan_in = 0;
};

// Sequential CNN/MLP built from LayerSpecs. Parameters are leaf tensors
// with requires_grad set; they double as the float master weights in
// straight-through training.
class Model {
 public:
  Model(std::vector<LayerSpec> layers, InputShape input, std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const InputShape& input_shape() const { return input_; }
  const std::vector<WeightLayerInfo>& weight_layers() const { return weight_info_; }
  std::size_t num_classes() const;

  // Weighted-layer parameters, in layer order.
  std::vector<Tensor>& weights() { return weights_; }
  const std::vector<Tensor>& weights() const { return weights_; }
  std::vector<Tensor>& biases() { return biases_; }
  const std::vector<Tensor>& biases() const { return biases_; }
  // One gain vector per kGain layer, in layer order.
  std::vector<Tensor>& gains() { return gains_; }
  const std::vector<Tensor>& gains() const { return gains_; }

  // Every trainable tensor: weights, then biases, then gains.
  std::vector<Tensor> parameters() const;
  void zero_grad();

  // Forward pass on x[N,C,H,W]. `weight_override`, when given, replaces the
  // weighted-layer weights (same order and shapes as weights()).
  Tensor forward(const Tensor& x, std::span<const Tensor> weight_override = {}) const;

  Model clone() const;

 private:
  Model() = default;

  std::vector<LayerSpec> layers_;
  InputShape input_;
  std::vector<WeightLayerInfo> weight_info_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  std::vector<Tensor> gains_;
  std::vector<std::size_t> gain_channels_;
};

// Resolves layer shapes; throws DimensionError on impossible geometry.
std::vector<WeightLayerInfo> resolve_weight_layers(const std::vector<LayerSpec>& layers,
                                                   const InputShape& input,
                                                   std::vector<std::size_t>* gain_channels = nullptr);

}  // namespace potq

#endif  // POTQ_MODEL_H_
