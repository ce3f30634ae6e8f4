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

#ifndef POTQ_SGD_H_
#define POTQ_SGD_H_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "potq/tensor.h"

namespace potq {

struct SgdConfig {
  double base_lr = 0.001;
  double momentum = 0.9;
  int epochs = 15;
  // (epoch, multiplier): from `epoch` on the rate is multiplied by
  // `multiplier`. Epochs are zero-based and strictly increasing.
  std::vector<std::pair<int, double>> lr_schedule{{5, 0.1}, {10, 0.1}};
  std::uint64_t seed = 1;

  // Throws ConfigError on a malformed configuration.
  void validate() const;
};

// base_lr times every multiplier whose epoch is <= `epoch`.
double learning_rate(const SgdConfig& config, int epoch);

// SGD with heavy-ball momentum: v = momentum * v + g; w -= lr * scale * v.
class Sgd {
 public:
  explicit Sgd(double momentum) : momentum_(momentum) {}

  // Updates params[i] from its grad buffer. `lr_scale`, when non-empty,
  // holds one multiplier span per parameter (empty span means 1).
  void step(std::span<Tensor> params, double lr,
            std::span<const std::span<const float>> lr_scale = {});

  void reset() { velocity_.clear(); }

 private:
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace potq

#endif  // POTQ_SGD_H_
