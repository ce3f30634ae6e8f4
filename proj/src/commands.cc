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

#include "potq/commands.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "potq/checkpoint.h"
#include "potq/errors.h"
#include "potq/packed_model.h"
#include "potq/shift_mac.h"

namespace potq {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

Tensor calibration_batch(const ExperimentConfig& config, const Dataset& train) {
  return train.head(config.calibration_samples).all_images();
}

Model checked_checkpoint(const ExperimentConfig& config, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint " + path.string() + " does not exist");
  Model model = read_checkpoint(path);
  if (format_architecture(model.layers()) != format_architecture(parse_architecture(config.architecture)) ||
      model.input_shape() != parse_input_shape(config.input)) {
    throw ConfigError("checkpoint architecture does not match the config");
  }
  return model;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const FormatError*>(&e)) return kExitFormat;
  return kExitFailure;
}

std::filesystem::path output_dir(const ExperimentConfig& config,
                                 const std::optional<std::string>& flag) {
  std::filesystem::path dir;
  if (flag) {
    dir = *flag;
  } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    dir = env;
  } else {
    dir = config.resolve(config.output_dir);
  }
  std::filesystem::create_directories(dir);
  return dir;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const EpochMetrics& m : history) {
    const std::string tail = "," + fmt("%.6g", m.lr) + "," + fmt("%.6f", m.zero_fraction) + "\n";
    out += std::to_string(m.epoch) + ",train," + fmt("%.6f", m.train_loss) + "," +
           fmt("%.6f", m.train_accuracy) + tail;
    out += std::to_string(m.epoch) + ",val," + fmt("%.6f", m.val_loss) + "," +
           fmt("%.6f", m.val_accuracy) + tail;
  }
  return out;
}

int cmd_train_float(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    std::ostream& out) {
  const DataSplits data = load_data(config);
  Model model(parse_architecture(config.architecture), parse_input_shape(config.input), config.seed);
  const TrainResult r = train_float(std::move(model), config.float_sgd, config.float_batch_size,
                                    data.train, data.val);
  write_checkpoint(out_dir / kCheckpointFile, r.final_weights);
  write_text(out_dir / kFloatMetricsFile, metrics_csv(r.history));
  out << "float val accuracy " << fmt("%.4f", evaluate(r.final_weights, data.val)) << "\n"
      << "wrote " << (out_dir / kCheckpointFile).string() << "\n";
  return kExitOk;
}

QuantizedModel run_qat(const ExperimentConfig& config, const Model& pretrained,
                       const DataSplits& data, std::vector<EpochMetrics>* history) {
  TrainResult r = train(config.qat, pretrained.clone(), data.train, data.val);
  calibrate_model(r.model, calibration_batch(config, data.train));
  if (history) *history = r.history;
  return std::move(r.model);
}

int cmd_qat(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
            const std::filesystem::path& out_dir, std::ostream& out) {
  const Model pretrained = checked_checkpoint(config, checkpoint);
  const DataSplits data = load_data(config);
  std::vector<EpochMetrics> history;
  const QuantizedModel q = run_qat(config, pretrained, data, &history);
  write_packed_model(out_dir / kPackedFile, q);
  write_text(out_dir / kQatMetricsFile, metrics_csv(history));
  out << to_string(config.qat.method) << " val accuracy " << fmt("%.4f", evaluate(q, data.val))
      << ", zero fraction " << fmt("%.4f", q.zero_fraction()) << "\n"
      << "wrote " << (out_dir / kPackedFile).string() << "\n";
  return kExitOk;
}

int cmd_pack(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
             const std::filesystem::path& out_dir, std::ostream& out) {
  ExperimentConfig snapshot = config;
  snapshot.qat.sgd.epochs = 0;
  return cmd_qat(snapshot, checkpoint, out_dir, out);
}

int cmd_eval(const std::filesystem::path& packed, const Dataset& data,
             std::span<const InferencePath> paths, const IntegerOptions& options, std::ostream& out) {
  const QuantizedModel q = read_packed_model(packed);
  out << kEvalHeader << "\n";
  for (InferencePath path : paths) {
    IntegerStats stats;
    const EvalResult r = evaluate_quantized(q, data, path, options, &stats);
    out << (path == InferencePath::kFloat ? "float" : "integer") << "," << fmt("%.6f", r.accuracy)
        << "," << fmt("%.6f", r.loss) << "," << stats.intermediate_events << ","
        << stats.accumulator_events << "," << stats.activation_clamps << "\n";
  }
  return kExitOk;
}

int cmd_mac_report(std::ostream& out) {
  out << format_cost_table_csv();
  const SelfCheckResult r = run_mac_self_check();
  out << "self-check: " << r.cases << " cases (" << r.pot_cases << " pot, " << r.apot_cases
      << " apot, " << r.uniform_cases << " uniform), " << r.mismatches << " mismatches: "
      << (r.passed() ? "PASS" : "FAIL") << "\n";
  return r.passed() ? kExitOk : kExitFailure;
}

int cmd_sweep_pruning(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                      std::span<const double> pf_list, const std::filesystem::path& out_dir,
                      std::ostream& out) {
  if (pf_list.empty()) throw ConfigError("sweep needs at least one pruning factor");
  const Model pretrained = checked_checkpoint(config, checkpoint);
  const DataSplits data = load_data(config);
  std::string csv = std::string(kSweepHeader) + "\n";
  for (double pf : pf_list) {
    if (pf < 0.0) throw ConfigError("pruning factors must be non-negative");
    ExperimentConfig c = config;
    c.qat.prune.pf = pf;
    const QuantizedModel q = run_qat(c, pretrained, data);
    csv += fmt("%g", pf) + "," + fmt("%.6f", q.zero_fraction()) + "," +
           fmt("%.6f", evaluate(q, data.val)) + "\n";
  }
  write_text(out_dir / kSweepFile, csv);
  out << csv;
  return kExitOk;
}

int cmd_size_report(const std::filesystem::path& packed, int baseline_bits, int word_bits,
                    std::ostream& out) {
  const QuantizedModel q = read_packed_model(packed);
  out << size_report_csv(model_size_report(q, baseline_bits), memory_traffic_report(q, word_bits));
  return kExitOk;
}

}  // namespace potq
