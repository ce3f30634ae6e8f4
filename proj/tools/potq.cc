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

// potq: train, quantize, pack and evaluate power-of-two quantized models.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "potq/commands.h"
#include "potq/config.h"
#include "potq/errors.h"
#include "potq/qat.h"
#include "potq/quantizers.h"

namespace {

using potq::ExperimentConfig;

struct ConfigFlags {
  std::string config;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::string> method;
  std::optional<std::string> scheme;
  std::optional<std::string> layer_schemes;
  std::optional<double> pf;
  std::optional<std::string> overflow;

  void add_to(CLI::App* cmd, bool qat_flags) {
    cmd->add_option("-c,--config", config, "experiment config (INI)")->required();
    cmd->add_option("-o,--output-dir", output_dir, "output directory");
    cmd->add_option("--seed", seed, "experiment seed");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--lr", lr, "base learning rate");
    cmd->add_option("--overflow", overflow, "integer path overflow mode (wrap|saturate)");
    if (qat_flags) {
      cmd->add_option("--method", method, "ste or alr");
      cmd->add_option("--scheme", scheme, "default weight scheme, e.g. pot4, uniform8, apot4");
      cmd->add_option("--layer-schemes", layer_schemes, "per-layer schemes, e.g. conv:pot4,fc:uniform8");
      cmd->add_option("--pf", pf, "pruning factor");
    }
  }

  // Loads the config and applies flags. --epochs and --lr target the QAT
  // block when `qat_phase` is set, the float block otherwise.
  ExperimentConfig load(bool qat_phase) const {
    ExperimentConfig c = potq::load_config(config);
    auto& sgd = qat_phase ? c.qat.sgd : c.float_sgd;
    if (seed) c.seed = *seed;
    if (epochs) sgd.epochs = *epochs;
    if (lr) sgd.base_lr = *lr;
    if (method) c.qat.method = potq::parse_qat_method(*method);
    if (scheme) c.qat.default_scheme = potq::parse_scheme(*scheme);
    if (pf) c.qat.prune.pf = *pf;
    if (overflow) c.overflow = potq::parse_overflow_mode(*overflow);
    if (layer_schemes) c.qat.layer_schemes = potq::parse_layer_schemes(*layer_schemes);
    return potq::parse_config(potq::serialize_config(c), c.base_dir);
  }
};

std::vector<potq::InferencePath> parse_paths(const std::string& text) {
  if (text == "float") return {potq::InferencePath::kFloat};
  if (text == "integer") return {potq::InferencePath::kInteger};
  if (text == "both") return {potq::InferencePath::kFloat, potq::InferencePath::kInteger};
  throw potq::ConfigError("--path must be float, integer or both");
}

std::filesystem::path checkpoint_or_default(const std::optional<std::string>& flag,
                                            const std::filesystem::path& out_dir) {
  return flag ? std::filesystem::path(*flag) : out_dir / potq::kCheckpointFile;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power-of-two weight quantization: training, packing and MAC emulation"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train-float", "train the float baseline and write a checkpoint");
  train_flags.add_to(train_cmd, false);

  ConfigFlags qat_flags;
  std::optional<std::string> qat_ckpt;
  auto* qat_cmd = app.add_subcommand("qat", "quantization-aware training from a float checkpoint");
  qat_flags.add_to(qat_cmd, true);
  qat_cmd->add_option("--checkpoint", qat_ckpt, "float checkpoint (default: <output>/float.ckpt)");

  ConfigFlags pack_flags;
  std::optional<std::string> pack_ckpt;
  auto* pack_cmd = app.add_subcommand("pack", "quantize a float checkpoint without training");
  pack_flags.add_to(pack_cmd, true);
  pack_cmd->add_option("--checkpoint", pack_ckpt, "float checkpoint (default: <output>/float.ckpt)");

  ConfigFlags eval_flags;
  std::string eval_model;
  std::string eval_path = "both";
  auto* eval_cmd = app.add_subcommand("eval", "accuracy of a packed model on the validation split");
  eval_flags.add_to(eval_cmd, false);
  eval_cmd->add_option("-m,--model", eval_model, "packed model (.pqt)")->required();
  eval_cmd->add_option("--path", eval_path, "float, integer or both");
  std::optional<int> eval_iw, eval_aw;
  eval_cmd->add_option("--intermediate-width", eval_iw, "product register bits (default: nominal)")
      ->check(CLI::Range(2, 62));
  eval_cmd->add_option("--accumulator-width", eval_aw, "accumulator bits (default: nominal)")
      ->check(CLI::Range(2, 62));

  auto* mac_cmd = app.add_subcommand("mac-report", "MAC cost table and exhaustive self-check");

  ConfigFlags sweep_flags;
  std::optional<std::string> sweep_ckpt;
  std::vector<double> sweep_pf{0.0, 0.5, 1.0, 2.0};
  auto* sweep_cmd = app.add_subcommand("sweep-pruning", "QAT at each pruning factor");
  sweep_flags.add_to(sweep_cmd, true);
  sweep_cmd->add_option("--checkpoint", sweep_ckpt, "float checkpoint (default: <output>/float.ckpt)");
  sweep_cmd->add_option("--pf-list", sweep_pf, "pruning factors")->delimiter(',');

  std::string size_model;
  int baseline_bits = 8;
  int word_bits = 32;
  auto* size_cmd = app.add_subcommand("size-report", "packed size and memory traffic of a model");
  size_cmd->add_option("-m,--model", size_model, "packed model (.pqt)")->required();
  size_cmd->add_option("--baseline-bits", baseline_bits, "bits per weight of the baseline packing");
  size_cmd->add_option("--word-bits", word_bits, "memory word width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? potq::kExitOk : potq::kExitConfig;
  }

  return potq::guarded(std::cerr, [&]() -> int {
    if (*train_cmd) {
      const ExperimentConfig c = train_flags.load(false);
      return potq::cmd_train_float(c, potq::output_dir(c, train_flags.output_dir), std::cout);
    }
    if (*qat_cmd) {
      const ExperimentConfig c = qat_flags.load(true);
      const auto out = potq::output_dir(c, qat_flags.output_dir);
      return potq::cmd_qat(c, checkpoint_or_default(qat_ckpt, out), out, std::cout);
    }
    if (*pack_cmd) {
      const ExperimentConfig c = pack_flags.load(true);
      const auto out = potq::output_dir(c, pack_flags.output_dir);
      return potq::cmd_pack(c, checkpoint_or_default(pack_ckpt, out), out, std::cout);
    }
    if (*eval_cmd) {
      const ExperimentConfig c = eval_flags.load(false);
      potq::IntegerOptions options;
      options.overflow = c.overflow;
      options.intermediate_width = eval_iw;
      options.accumulator_width = eval_aw;
      return potq::cmd_eval(eval_model, potq::load_data(c).val, parse_paths(eval_path), options,
                            std::cout);
    }
    if (*mac_cmd) return potq::cmd_mac_report(std::cout);
    if (*sweep_cmd) {
      const ExperimentConfig c = sweep_flags.load(true);
      const auto out = potq::output_dir(c, sweep_flags.output_dir);
      return potq::cmd_sweep_pruning(c, checkpoint_or_default(sweep_ckpt, out), sweep_pf, out,
                                     std::cout);
    }
    if (*size_cmd) return potq::cmd_size_report(size_model, baseline_bits, word_bits, std::cout);
    return potq::kExitFailure;
  });
}
