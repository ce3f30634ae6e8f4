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

#ifndef POTQ_CONFIG_H_
#define POTQ_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "potq/dataset.h"
#include "potq/qat.h"
#include "potq/sgd.h"
#include "potq/shift_mac.h"

namespace potq {

enum class DataFormat { kIdx, kCsv, kBlobs };

DataFormat parse_data_format(std::string_view text);
std::string_view to_string(DataFormat format);

struct DataConfig {
  DataFormat format = DataFormat::kBlobs;
  // idx
  std::string train_images;
  std::string train_labels;
  std::string val_images;
  std::string val_labels;
  // csv
  std::string train_csv;
  std::string val_csv;
  // blobs
  std::size_t classes = 10;
  std::size_t train_per_class = 100;
  std::size_t val_per_class = 30;
  double noise = 1.0;

  bool operator==(const DataConfig&) const = default;
};

// One experiment, stored as INI text:
//
//   [experiment] version, seed, output_dir
//   [model]      architecture, input
//   [data]       format (idx|csv|blobs) and its fields
//   [float]      epochs, lr, momentum, lr_schedule, batch_size
//   [qat]        method, scheme, layer_schemes, pf, epochs, lr, momentum,
//                lr_schedule, batch_size, quantize_first_layer,
//                quantize_last_layer
//   [inference]  overflow, calibration_samples
//
// lr_schedule is "epoch:multiplier,..."; layer_schemes is
// "layer:scheme,..." (e.g. "conv:pot4,fc:uniform8"). Relative paths are
// resolved against the directory of the config file.
struct ExperimentConfig {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string architecture = "conv3x3:16,relu,conv3x3:32,relu,maxpool2,fc:10";
  std::string input = "1x8x8";
  DataConfig data;
  SgdConfig float_sgd{0.05, 0.9, 15, {{5, 0.1}, {10, 0.1}}, 1};
  std::size_t float_batch_size = 32;
  QatConfig qat;
  OverflowMode overflow = OverflowMode::kWrap;
  std::size_t calibration_samples = 256;
  std::filesystem::path base_dir;  // not serialized

  std::filesystem::path resolve(const std::string& path) const;
  bool operator==(const ExperimentConfig&) const;
};

// ConfigError on syntax errors, unknown sections or keys, bad values and,
// when `check_paths` is set, dataset paths that do not exist.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {},
                              bool check_paths = true);
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical text: every key in fixed order. parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

std::string format_lr_schedule(const std::vector<std::pair<int, double>>& schedule);
std::vector<std::pair<int, double>> parse_lr_schedule(std::string_view text);

std::string format_layer_schemes(const std::map<std::string, QuantScheme>& schemes);
std::map<std::string, QuantScheme> parse_layer_schemes(std::string_view text);

struct DataSplits {
  Dataset train;
  Dataset val;
};
DataSplits load_data(const ExperimentConfig& config);

}  // namespace potq

#endif  // POTQ_CONFIG_H_
