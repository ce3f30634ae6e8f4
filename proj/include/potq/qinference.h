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

#ifndef POTQ_QINFERENCE_H_
#define POTQ_QINFERENCE_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "potq/dataset.h"
#include "potq/qat.h"
#include "potq/quantized_model.h"
#include "potq/shift_mac.h"
#include "potq/tensor.h"

namespace potq {

// Per-layer activation scales: real input of weighted layer i is
// represented as round(x / scales[i]) in signed 8 bits.
struct ActQuantParams {
  std::vector<float> scales;
};

// Symmetric max-abs calibration of every weighted layer's input, measured on
// the float path over `batch`. An all-zero input gets scale 1/127.
ActQuantParams calibrate(const QuantizedModel& model, const Tensor& batch);
// Calibrates and stores the scales in model.activation_scales.
void calibrate_model(QuantizedModel& model, const Tensor& batch);

enum class InferencePath { kFloat, kInteger };

struct IntegerOptions {
  // Activation width. Widths other than 8 need `wide_datapath`.
  int act_bits = 8;
  // Exact 64-bit products and sums instead of the MAC emulator.
  bool wide_datapath = false;
  OverflowMode overflow = OverflowMode::kWrap;
  // Replace the nominal register widths of every layer's MAC.
  std::optional<int> intermediate_width;
  std::optional<int> accumulator_width;
};

struct IntegerStats {
  std::int64_t macs = 0;
  std::int64_t skipped_zero_weights = 0;
  std::int64_t intermediate_events = 0;
  std::int64_t accumulator_events = 0;
  std::int64_t activation_clamps = 0;  // only non-zero for stale calibration

  IntegerStats& operator+=(const IntegerStats& other);
};

// Datapath chosen for a quantized weight layer: PoT up to 4 bits on the
// shift unit, uniform up to 4 bits on the 4x8 multiplier, wider uniform on
// the 8x8 multiplier, APoT on the two-shift unit. nullopt for float layers.
// InputError for PoT wider than 4 bits.
std::optional<MacKind> mac_kind_for(const QuantScheme& scheme);
// Real value of one integer weight unit of the layer.
double integer_weight_scale(const QuantizedLayer& q);
// Datapath form of weight i; nullopt for a masked weight.
std::optional<WeightCode> weight_code(const QuantizedLayer& q, std::size_t i);

// Logits for x[N,C,H,W]. The float path runs the dequantized weights. The
// integer path quantizes each weighted layer's input to signed integers,
// accumulates with the layer's MAC and rescales the sum; float-scheme layers
// stay in float. StateError when the integer path runs uncalibrated.
Tensor forward_quantized(const QuantizedModel& model, const Tensor& x, InferencePath path,
                         const IntegerOptions& options = {}, IntegerStats* stats = nullptr);

EvalResult evaluate_quantized(const QuantizedModel& model, const Dataset& data, InferencePath path,
                              const IntegerOptions& options = {}, IntegerStats* stats = nullptr);

}  // namespace potq

#endif  // POTQ_QINFERENCE_H_
