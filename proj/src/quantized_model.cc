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

#include "potq/quantized_model.h"

#include <algorithm>

#include "potq/errors.h"

namespace potq {

bool QuantizedModel::calibrated() const {
  return activation_scales.size() == weights.size() &&
         std::all_of(activation_scales.begin(), activation_scales.end(),
                     [](float s) { return s > 0.0f; });
}

std::size_t QuantizedModel::weight_count() const {
  std::size_t n = 0;
  for (const QuantizedLayer& q : weights) n += q.size();
  return n;
}

double QuantizedModel::zero_fraction() const {
  std::size_t zeros = 0;
  for (const QuantizedLayer& q : weights) zeros += q.zero_count();
  const std::size_t n = weight_count();
  return n == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(n);
}

QuantizedModel quantize_model(const Model& model, std::span<const QuantScheme> schemes,
                              PruneConfig prune) {
  if (schemes.size() != model.weights().size()) {
    throw ConfigError("expected " + std::to_string(model.weights().size()) +
                      " layer schemes, got " + std::to_string(schemes.size()));
  }
  QuantizedModel q;
  q.layers = model.layers();
  q.input = model.input_shape();
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    q.weights.push_back(quantize(model.weights()[i], schemes[i], prune));
    const auto b = model.biases()[i].data();
    q.biases.emplace_back(b.begin(), b.end());
  }
  for (const Tensor& g : model.gains()) q.gains.emplace_back(g.data().begin(), g.data().end());
  q.activation_scales.assign(schemes.size(), 0.0f);
  return q;
}

Model to_float_model(const QuantizedModel& qmodel) {
  Model m(qmodel.layers, qmodel.input, 0);
  if (m.weights().size() != qmodel.weights.size() || m.gains().size() != qmodel.gains.size()) {
    throw DimensionError("quantized model does not match its architecture");
  }
  for (std::size_t i = 0; i < qmodel.weights.size(); ++i) {
    if (qmodel.weights[i].shape != m.weights()[i].shape()) {
      throw DimensionError("layer " + std::to_string(i) + " weight shape mismatch");
    }
    dequantize_into(qmodel.weights[i], m.weights()[i].mutable_data());
    auto b = m.biases()[i].mutable_data();
    if (qmodel.biases[i].size() != b.size()) throw DimensionError("bias size mismatch");
    std::copy(qmodel.biases[i].begin(), qmodel.biases[i].end(), b.begin());
  }
  for (std::size_t i = 0; i < qmodel.gains.size(); ++i) {
    auto g = m.gains()[i].mutable_data();
    if (qmodel.gains[i].size() != g.size()) throw DimensionError("gain size mismatch");
    std::copy(qmodel.gains[i].begin(), qmodel.gains[i].end(), g.begin());
  }
  return m;
}

}  // namespace potq
