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

#ifndef POTQ_COMMANDS_H_
#define POTQ_COMMANDS_H_

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "potq/config.h"
#include "potq/qat.h"
#include "potq/qinference.h"

namespace potq {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime errors, failed self-check
inline constexpr int kExitConfig = 2;
inline constexpr int kExitFormat = 3;

// Overrides output_dir from the config when set.
inline constexpr const char* kOutputDirEnv = "POTQ_OUTPUT_DIR";

// Output files written into the output directory.
inline constexpr const char* kCheckpointFile = "float.ckpt";
inline constexpr const char* kFloatMetricsFile = "float_metrics.csv";
inline constexpr const char* kPackedFile = "model.pqt";
inline constexpr const char* kQatMetricsFile = "qat_metrics.csv";
inline constexpr const char* kSweepFile = "pruning_sweep.csv";

inline constexpr const char* kMetricsHeader = "epoch,split,loss,accuracy,lr,zero_fraction";
inline constexpr const char* kEvalHeader =
    "path,accuracy,loss,intermediate_events,accumulator_events,activation_clamps";
inline constexpr const char* kSweepHeader = "pf,zero_fraction,accuracy";

// Explicit flag, then the environment variable, then the config value.
std::filesystem::path output_dir(const ExperimentConfig& config,
                                 const std::optional<std::string>& flag = {});

std::string metrics_csv(const std::vector<EpochMetrics>& history);

int cmd_train_float(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    std::ostream& out);
int cmd_qat(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
            const std::filesystem::path& out_dir, std::ostream& out);
// Quantizes a float checkpoint without training and writes the packed model.
int cmd_pack(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
             const std::filesystem::path& out_dir, std::ostream& out);
// One row per requested path.
int cmd_eval(const std::filesystem::path& packed, const Dataset& data,
             std::span<const InferencePath> paths, const IntegerOptions& options, std::ostream& out);
int cmd_mac_report(std::ostream& out);
int cmd_sweep_pruning(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                      std::span<const double> pf_list, const std::filesystem::path& out_dir,
                      std::ostream& out);
int cmd_size_report(const std::filesystem::path& packed, int baseline_bits, int word_bits,
                    std::ostream& out);

// Quantized, calibrated model after QAT on the config's data.
QuantizedModel run_qat(const ExperimentConfig& config, const Model& pretrained,
                       const DataSplits& data, std::vector<EpochMetrics>* history = nullptr);

int exit_code_for(const std::exception& e);

// Runs `body`, printing any error to `err` and mapping it to an exit code.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace potq

#endif  // POTQ_COMMANDS_H_
