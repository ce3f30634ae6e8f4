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

#ifndef POTQ_DATASET_H_
#define POTQ_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "potq/model.h"
#include "potq/tensor.h"

namespace potq {

// In-memory labelled image set, samples stored contiguously in NCHW order.
struct Dataset {
  InputShape shape;
  std::size_t num_classes = 0;
  std::vector<float> images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Tensor batch_images(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
  Tensor all_images() const;
  // First `count` samples (or fewer).
  Dataset head(std::size_t count) const;
};

// IDX (ubyte) image + label files; pixels scaled to [0,1].
Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// One sample per row: "label,v0,v1,...". A non-numeric first row is treated
// as a header. Values are used as-is.
Dataset read_csv(const std::filesystem::path& path, const InputShape& shape);

struct BlobsConfig {
  std::size_t classes = 10;
  std::size_t samples_per_class = 100;
  InputShape shape{1, 8, 8};
  double noise = 1.0;
  std::uint64_t seed = 1;
};

// Gaussian blobs shaped as images: each class has a fixed random mean image
// (drawn from a generator seeded independently of `seed`) and samples add
// isotropic noise. Two calls with different seeds give disjoint draws from
// the same class distributions.
Dataset make_gaussian_blobs(const BlobsConfig& config);

}  // namespace potq

#endif  // POTQ_DATASET_H_
