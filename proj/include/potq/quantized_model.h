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

#ifndef POTQ_QUANTIZED_MODEL_H_
#define POTQ_QUANTIZED_MODEL_H_

#include <span>
#include <vector>

#include "potq/model.h"
#include "potq/quantizers.h"

namespace potq {

// A model whose weighted layers hold QuantizedLayers. Biases and gains stay
// float. activation_scales[i] maps the real-valued input of weighted layer
// i to signed 8-bit integers; 0 means not calibrated.
struct QuantizedModel {
  std::vector<LayerSpec> layers;
  InputShape input;
  std::vector<QuantizedLayer> weights;
  std::vector<std::vector<float>> biases;
  std::vector<std::vector<float>> gains;
  std::vector<float> activation_scales;

  bool calibrated() const;
  std::size_t weight_count() const;
  // Fraction of exactly-zero weights over every weighted layer.
  double zero_fraction() const;
  bool operator==(const QuantizedModel&) const = default;
};

QuantizedModel quantize_model(const Model& model, std::span<const QuantScheme> schemes,
                              PruneConfig prune = {});

// Float model carrying the dequantized weights. Its forward pass is the
// float inference path.
Model to_float_model(const QuantizedModel& qmodel);

}  // namespace potq

#endif  // POTQ_QUANTIZED_MODEL_H_
