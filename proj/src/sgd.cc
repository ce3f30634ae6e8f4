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

#include "potq/sgd.h"

#include "potq/errors.h"

namespace potq {

void SgdConfig::validate() const {
  if (!(base_lr >= 0.0)) throw ConfigError("base_lr must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  for (std::size_t i = 0; i < lr_schedule.size(); ++i) {
    if (lr_schedule[i].first < 0) throw ConfigError("lr_schedule epochs must be non-negative");
    if (i > 0 && lr_schedule[i].first <= lr_schedule[i - 1].first) {
      throw ConfigError("lr_schedule epochs must be strictly increasing");
    }
  }
}

double learning_rate(const SgdConfig& config, int epoch) {
  double lr = config.base_lr;
  for (const auto& [at, multiplier] : config.lr_schedule) {
    if (at <= epoch) lr *= multiplier;
  }
  return lr;
}

void Sgd::step(std::span<Tensor> params, double lr,
               std::span<const std::span<const float>> lr_scale) {
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (!p.has_grad()) continue;
    auto data = p.mutable_data();
    auto grad = p.grad();
    auto& v = velocity_[i];
    if (v.size() != data.size()) v.assign(data.size(), 0.0);
    const std::span<const float> scale =
        i < lr_scale.size() ? lr_scale[i] : std::span<const float>{};
    for (std::size_t j = 0; j < data.size(); ++j) {
      v[j] = momentum_ * v[j] + grad[j];
      const double s = scale.empty() ? 1.0 : scale[j];
      data[j] = static_cast<float>(data[j] - lr * s * v[j]);
    }
  }
}

}  // namespace potq
