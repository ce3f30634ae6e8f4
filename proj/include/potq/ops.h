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

#ifndef POTQ_OPS_H_
#define POTQ_OPS_H_

#include <cstddef>
#include <span>

#include "potq/tensor.h"

namespace potq {

// Differentiable operators. Dot products accumulate in double and store
// float results; summation runs in a fixed order so results are
// reproducible run to run.

// x[N,I] * w[O,I]^T + b[O]. `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Cross-correlation of x[N,C,H,W] with w[F,C,KH,KW] plus b[F] (optional).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dGeometry geometry);

// Output spatial extent, or DimensionError for an impossible geometry.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, Conv2dGeometry geometry);

Tensor relu(const Tensor& x);

// Non-overlapping max pooling with a square window of `size`.
Tensor max_pool2d(const Tensor& x, std::size_t size);

// [N, ...] -> [N, prod(...)].
Tensor flatten(const Tensor& x);

// Per-channel multiplicative gain on x[N,C,...]; the folded form of a
// batch-norm scale.
Tensor channel_scale(const Tensor& x, const Tensor& gain);

Tensor mul(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);

// Mean softmax cross-entropy of logits[N,K] against integer labels.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

// Effective per-channel output scale once a batch-norm gain absorbs the
// weight scale factor.
inline double fold_scale(double gain, double scale_factor) { return gain * scale_factor; }

}  // namespace potq

#endif  // POTQ_OPS_H_
