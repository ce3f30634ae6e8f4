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

#include "potq/dataset.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "potq/errors.h"

namespace potq {

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw FormatError("truncated IDX header in " + path.string());
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

void finalize_classes(Dataset& d) {
  int mx = -1;
  for (int l : d.labels) {
    if (l < 0) throw FormatError("negative label");
    mx = std::max(mx, l);
  }
  d.num_classes = static_cast<std::size_t>(mx + 1);
}

}  // namespace

Tensor Dataset::batch_images(std::span<const std::size_t> indices) const {
  const std::size_t per = shape.numel();
  std::vector<float> data(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw InputError("sample index out of range");
    std::copy_n(images.begin() + static_cast<std::ptrdiff_t>(indices[i] * per), per,
                data.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return Tensor::from_data({indices.size(), shape.channels, shape.height, shape.width},
                           std::move(data));
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

Tensor Dataset::all_images() const {
  if (size() == 0) throw InputError("empty dataset");
  return Tensor::from_data({size(), shape.channels, shape.height, shape.width}, images);
}

Dataset Dataset::head(std::size_t count) const {
  Dataset d;
  d.shape = shape;
  d.num_classes = num_classes;
  count = std::min(count, size());
  d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count));
  d.images.assign(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(count * shape.numel()));
  return d;
}

Dataset read_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  std::ifstream img = open_binary(images_path);
  std::ifstream lab = open_binary(labels_path);
  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != 0x0803) throw FormatError("not an IDX ubyte image file: " + images_path.string());
  const std::uint32_t count = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);
  if (read_be32(lab, labels_path) != 0x0801) {
    throw FormatError("not an IDX ubyte label file: " + labels_path.string());
  }
  if (read_be32(lab, labels_path) != count) {
    throw FormatError("image and label counts differ");
  }
  if (count == 0 || rows == 0 || cols == 0) throw FormatError("empty IDX file");

  Dataset d;
  d.shape = InputShape{1, rows, cols};
  std::vector<unsigned char> pixels(static_cast<std::size_t>(count) * rows * cols);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
    throw FormatError("truncated IDX image payload");
  }
  std::vector<unsigned char> raw_labels(count);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), count)) {
    throw FormatError("truncated IDX label payload");
  }
  d.images.resize(pixels.size());
  std::transform(pixels.begin(), pixels.end(), d.images.begin(),
                 [](unsigned char p) { return static_cast<float>(p) / 255.0f; });
  d.labels.assign(raw_labels.begin(), raw_labels.end());
  finalize_classes(d);
  return d;
}

Dataset read_csv(const std::filesystem::path& path, const InputShape& shape) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  Dataset d;
  d.shape = shape;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    try {
      std::size_t used = 0;
      const int label = std::stoi(cells.at(0), &used);
      if (used != cells[0].size()) throw std::invalid_argument("label");
      if (cells.size() != shape.numel() + 1) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(shape.numel() + 1) + " columns");
      }
      d.labels.push_back(label);
      for (std::size_t i = 1; i < cells.size(); ++i) d.images.push_back(std::stof(cells[i]));
    } catch (const std::invalid_argument&) {
      if (line_no == 1) continue;  // header row
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  if (d.labels.empty()) throw FormatError("no samples in " + path.string());
  finalize_classes(d);
  return d;
}

Dataset make_gaussian_blobs(const BlobsConfig& config) {
  if (config.classes < 2 || config.samples_per_class == 0) {
    throw InputError("blobs need at least two classes and one sample per class");
  }
  const std::size_t per = config.shape.numel();
  std::mt19937_64 centers_rng(0x9e3779b97f4a7c15ULL);
  std::normal_distribution<float> unit(0.0f, 1.0f);
  std::vector<float> centers(config.classes * per);
  for (float& c : centers) c = unit(centers_rng);

  std::mt19937_64 rng(config.seed);
  Dataset d;
  d.shape = config.shape;
  d.num_classes = config.classes;
  for (std::size_t s = 0; s < config.samples_per_class; ++s) {
    for (std::size_t k = 0; k < config.classes; ++k) {
      d.labels.push_back(static_cast<int>(k));
      for (std::size_t i = 0; i < per; ++i) {
        d.images.push_back(centers[k * per + i] + static_cast<float>(config.noise) * unit(rng));
      }
    }
  }
  return d;
}

}  // namespace potq
