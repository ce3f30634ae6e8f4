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

#ifndef POTQ_QAT_H_
#define POTQ_QAT_H_

#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "potq/dataset.h"
#include "potq/model.h"
#include "potq/quantized_model.h"
#include "potq/quantizers.h"
#include "potq/sgd.h"

namespace potq {

enum class QatMethod {
  kSte,  // float master weights, quantized forward, identity backward
  kAlr,  // quantized weights only, per-weight learning-rate scaling
};

QatMethod parse_qat_method(std::string_view text);
std::string_view to_string(QatMethod method);

struct QatConfig {
  QatMethod method = QatMethod::kSte;
  QuantScheme default_scheme = PotScheme{4, 0};
  // Overrides keyed by layer name ("conv2", "fc1") or kind ("conv", "fc").
  // Names win over kinds.
  std::map<std::string, QuantScheme> layer_schemes;
  PruneConfig prune;
  SgdConfig sgd;
  bool quantize_first_layer = true;
  bool quantize_last_layer = true;
  std::size_t batch_size = 32;
};

// Scheme for every weighted layer of `model`. Throws ConfigError for
// override keys that name no layer.
std::vector<QuantScheme> resolve_schemes(const Model& model, const QatConfig& config);

// Learning-rate multiplier for a PoT weight with the given code: the gap
// below its level relative to the gap below the smallest level,
// 2^(max_code - code).
double alr_scale(int code, int bits);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Top-1 accuracy and mean cross-entropy of a float model.
EvalResult evaluate_model(const Model& model, const Dataset& data);
// Float-path accuracy of a quantized model (dequantized weights).
double evaluate(const QuantizedModel& model, const Dataset& data);
double evaluate(const Model& model, const Dataset& data);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
  double zero_fraction = 0.0;
};

struct BatchStats {
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
};

// Training state shared by both QAT flows. In STE mode the wrapped model
// holds the float master weights; in ALR mode its weights always equal the
// dequantized quantized weights and no master copy exists.
class QatState {
 public:
  explicit QatState(QatConfig config);

  // Takes the pretrained float model. ALR immediately replaces the weights
  // with their quantized values.
  void initialize(Model pretrained);
  bool initialized() const { return model_.has_value(); }

  const QatConfig& config() const { return config_; }
  const std::vector<QuantScheme>& schemes() const { return schemes_; }
  const std::vector<QuantizedLayer>& quantized() const { return quantized_; }
  // STE master weights; StateError in ALR mode.
  const Model& master() const;
  // The wrapped model (master for STE, live quantized weights for ALR).
  const Model& model() const;
  QuantizedModel snapshot() const;
  int epoch() const { return epoch_; }
  const std::vector<EpochMetrics>& history() const { return history_; }

  // One optimization step on a batch.
  BatchStats ste_step(const Tensor& x, std::span<const int> labels, double lr);
  BatchStats alr_step(const Tensor& x, std::span<const int> labels, double lr);

  // One pass over `train` in seeded shuffled order; `val` may be null.
  EpochMetrics ste_epoch(const Dataset& train, const Dataset* val);
  EpochMetrics alr_epoch(const Dataset& train, const Dataset* val);

 private:
  Model& mutable_model();
  void requantize();
  EpochMetrics run_epoch(const Dataset& train, const Dataset* val, bool ste);

  QatConfig config_;
  std::optional<Model> model_;
  std::vector<QuantScheme> schemes_;
  std::vector<QuantizedLayer> quantized_;
  Sgd sgd_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  std::vector<EpochMetrics> history_;
};

struct TrainResult {
  QuantizedModel model;
  Model final_weights;  // STE master or ALR live weights
  std::vector<EpochMetrics> history;
};

// Runs config.sgd.epochs epochs of the configured method. Throws
// TrainingError when the loss stops being finite.
TrainResult train(const QatConfig& config, Model pretrained, const Dataset& train_data,
                  const Dataset& val_data);

// Float baseline: the same loop with every layer left in float.
TrainResult train_float(Model model, const SgdConfig& sgd, std::size_t batch_size,
                        const Dataset& train_data, const Dataset& val_data);

}  // namespace potq

#endif  // POTQ_QAT_H_
