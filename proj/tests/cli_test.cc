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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "potq/checkpoint.h"
#include "potq/commands.h"
#include "potq/config.h"
#include "potq/errors.h"
#include "potq/packed_model.h"

namespace potq {
namespace {

namespace fs = std::filesystem;

constexpr const char* kSmallConfig = R"([experiment]
version = 1
seed = 3
output_dir = out

[model]
architecture = conv3x3:4,relu,maxpool2,fc:4
input = 1x4x4

[data]
format = blobs
classes = 4
train_per_class = 20
val_per_class = 10
noise = 0.5

[float]
epochs = 2
lr = 0.05
batch_size = 16

[qat]
method = ste
scheme = pot4
epochs = 1
lr = 0.001
batch_size = 16
)";

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + POTQ_CLI_PATH + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("potq_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = dir_ / "exp.ini";
    std::ofstream(config_) << kSmallConfig;
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string cfg() const { return "--config " + config_.string(); }
  fs::path out() const { return dir_ / "out"; }

  fs::path dir_;
  fs::path config_;
};

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  const std::string text = serialize_config(c);
  const ExperimentConfig back = parse_config(text, {}, false);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(c.qat.sgd.base_lr, 0.001);
  EXPECT_EQ(c.qat.sgd.epochs, 15);
  EXPECT_EQ(c.overflow, OverflowMode::kWrap);
}

TEST(Config, EditedValuesRoundTrip) {
  ExperimentConfig c = parse_config(kSmallConfig, {}, false);
  c.qat.method = QatMethod::kAlr;
  c.qat.layer_schemes = parse_layer_schemes("conv:pot4,fc:uniform8,conv1:apot4");
  c.qat.prune.pf = 0.37;
  c.qat.sgd.lr_schedule = {{2, 0.5}, {7, 0.1}};
  c.overflow = OverflowMode::kSaturate;
  const ExperimentConfig back = parse_config(serialize_config(c), {}, false);
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.qat.prune.pf, 0.37);
  EXPECT_EQ(format_layer_schemes(back.qat.layer_schemes), "conv:pot4,conv1:apot4,fc:uniform8");
}

TEST(Config, SeedReachesBothTrainers) {
  const ExperimentConfig c = parse_config(kSmallConfig, {}, false);
  EXPECT_EQ(c.float_sgd.seed, 3u);
  EXPECT_EQ(c.qat.sgd.seed, 3u);
}

TEST(Config, Rejections) {
  const std::string base = kSmallConfig;
  EXPECT_THROW(parse_config(base + "colour = red\n", {}, false), ConfigError);
  EXPECT_THROW(parse_config(base + "[extra]\nkey = 1\n", {}, false), ConfigError);
  EXPECT_THROW(parse_config("[qat]\nmethod = sgd\n", {}, false), ConfigError);
  EXPECT_THROW(parse_config("[qat]\nscheme = pot9\n", {}, false), ConfigError);
  EXPECT_THROW(parse_config("[qat]\npf = -1\n", {}, false), ConfigError);
  EXPECT_THROW(parse_config("[float]\nlr_schedule = 5:0.1,3:0.1\n", {}, false), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nversion = 2\n", {}, false), ConfigError);
  EXPECT_THROW(parse_config("[model]\narchitecture = conv3x3:4,relu\n", {}, false), ConfigError);
  EXPECT_THROW(parse_config("[data]\nformat = idx\ntrain_images = nope.idx\n", "/tmp", true),
               ConfigError);
  EXPECT_THROW(load_config("/nonexistent/exp.ini"), ConfigError);
}

TEST(Config, LayerSchemeOverrideIsValidated) {
  ExperimentConfig c = parse_config(kSmallConfig, {}, false);
  c.qat.layer_schemes = parse_layer_schemes("conv9:pot4");
  const Model m(parse_architecture(c.architecture), parse_input_shape(c.input), 1);
  EXPECT_THROW(resolve_schemes(m, c.qat), ConfigError);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const Model m(parse_architecture("conv3x3:4,relu,gain,maxpool2,fc:3"), {1, 4, 4}, 7);
  const auto bytes = serialize_checkpoint(m);
  const Model back = deserialize_checkpoint(bytes);
  ASSERT_EQ(back.parameters().size(), m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    EXPECT_TRUE(std::ranges::equal(back.parameters()[i].data(), m.parameters()[i].data()));
  }
  EXPECT_EQ(format_architecture(back.layers()), format_architecture(m.layers()));
  auto bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), FormatError);
  EXPECT_THROW(deserialize_checkpoint(std::span(bytes.data(), bytes.size() - 3)), FormatError);
  bad = bytes;
  bad.push_back(1);
  EXPECT_THROW(deserialize_checkpoint(bad), FormatError);
}

TEST_F(CliTest, MacReport) {
  const RunResult r = run_cli("mac-report");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("PoT 4x8, 39, 25"), std::string::npos);
  EXPECT_NE(r.output.find("0.167"), std::string::npos);
  EXPECT_NE(r.output.find("PASS"), std::string::npos);
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("train-float --config " + (dir_ / "missing.ini").string()).code, 2);
  std::ofstream(dir_ / "bad.ini") << "[data]\nformat = idx\ntrain_images = missing.idx\n";
  const RunResult bad = run_cli("train-float --config " + (dir_ / "bad.ini").string());
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("error"), std::string::npos);
  std::ofstream(dir_ / "junk.pqt") << "JUNKJUNKJUNK";
  EXPECT_EQ(run_cli("eval " + cfg() + " --model " + (dir_ / "junk.pqt").string()).code, 3);
  EXPECT_EQ(run_cli("size-report --model " + (dir_ / "junk.pqt").string()).code, 3);
  EXPECT_EQ(run_cli("qat " + cfg() + " --checkpoint " + (dir_ / "none.ckpt").string()).code, 2);
}

TEST_F(CliTest, TrainIsDeterministicAndHonorsEnvOutput) {
  const fs::path a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run_cli("train-float " + cfg() + " --output-dir " + a.string()).code, 0);
  const RunResult rb = run_cli("train-float " + cfg(), std::string(kOutputDirEnv) + "=" + b.string());
  ASSERT_EQ(rb.code, 0) << rb.output;
  EXPECT_TRUE(fs::exists(b / kCheckpointFile));
  const std::string ma = read_file(a / kFloatMetricsFile);
  EXPECT_EQ(ma, read_file(b / kFloatMetricsFile));
  EXPECT_EQ(read_file(a / kCheckpointFile), read_file(b / kCheckpointFile));
  EXPECT_EQ(ma.substr(0, ma.find('\n')), kMetricsHeader);
  EXPECT_EQ(std::count(ma.begin(), ma.end(), '\n'), 1 + 2 * 2);
  // The seed flag changes the run.
  const fs::path c = dir_ / "c";
  ASSERT_EQ(run_cli("train-float " + cfg() + " --seed 4 --output-dir " + c.string()).code, 0);
  EXPECT_NE(read_file(c / kCheckpointFile), read_file(a / kCheckpointFile));
}

TEST_F(CliTest, QatPackEvalSizeReport) {
  ASSERT_EQ(run_cli("train-float " + cfg() + " -o " + out().string()).code, 0);
  const RunResult q = run_cli("qat " + cfg() + " -o " + out().string() +
                              " --layer-schemes conv:pot4,fc:uniform8");
  ASSERT_EQ(q.code, 0) << q.output;
  const QuantizedModel m = read_packed_model(out() / kPackedFile);
  ASSERT_EQ(m.weights.size(), 2u);
  EXPECT_EQ(format_scheme(m.weights[0].scheme), "pot4");
  EXPECT_EQ(format_scheme(m.weights[1].scheme), "uniform8");
  EXPECT_TRUE(m.calibrated());
  const std::string metrics = read_file(out() / kQatMetricsFile);
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 1 + 2);

  const RunResult e = run_cli("eval " + cfg() + " --path both --model " + (out() / kPackedFile).string());
  ASSERT_EQ(e.code, 0) << e.output;
  EXPECT_NE(e.output.find(kEvalHeader), std::string::npos);
  EXPECT_NE(e.output.find("\nfloat,"), std::string::npos);
  EXPECT_NE(e.output.find("\ninteger,"), std::string::npos);

  const RunResult w = run_cli("eval " + cfg() + " --path integer --intermediate-width 16 --accumulator-width 24"
                              " --model " + (out() / kPackedFile).string());
  ASSERT_EQ(w.code, 0) << w.output;
  EXPECT_NE(w.output.find("\ninteger,"), std::string::npos);
  EXPECT_EQ(run_cli("eval " + cfg() + " --intermediate-width 1 --model " + (out() / kPackedFile).string()).code, 2);

  // Float path through the CLI reports the same accuracy as evaluate().
  const ExperimentConfig c = load_config(config_);
  const DataSplits d = load_data(c);
  std::ostringstream direct;
  const InferencePath fp[] = {InferencePath::kFloat};
  ASSERT_EQ(cmd_eval(out() / kPackedFile, d.val, fp, {}, direct), 0);
  char acc[64];
  std::snprintf(acc, sizeof(acc), "\nfloat,%.6f,", evaluate(m, d.val));
  EXPECT_NE(direct.str().find(acc), std::string::npos) << direct.str();
  EXPECT_NE(e.output.find(acc), std::string::npos);

  const RunResult s = run_cli("size-report --model " + (out() / kPackedFile).string());
  ASSERT_EQ(s.code, 0) << s.output;
  EXPECT_NE(s.output.find("packed_bytes,baseline_bytes"), std::string::npos);
}

TEST_F(CliTest, ZeroEpochQatIsQuantizedCheckpoint) {
  ASSERT_EQ(run_cli("train-float " + cfg() + " -o " + out().string()).code, 0);
  ASSERT_EQ(run_cli("qat " + cfg() + " -o " + out().string() + " --epochs 0 --method alr").code, 0);
  const QuantizedModel q = read_packed_model(out() / kPackedFile);
  const Model ckpt = read_checkpoint(out() / kCheckpointFile);
  const std::vector<QuantScheme> schemes(2, PotScheme{4, 0});
  EXPECT_EQ(q.weights, quantize_model(ckpt, schemes).weights);
  const fs::path packed = dir_ / "packed";
  ASSERT_EQ(run_cli("pack " + cfg() + " -o " + packed.string() + " --checkpoint " +
                    (out() / kCheckpointFile).string()).code, 0);
  EXPECT_EQ(read_file(packed / kPackedFile), read_file(out() / kPackedFile));
}

TEST_F(CliTest, MismatchedCheckpointIsConfigError) {
  ASSERT_EQ(run_cli("train-float " + cfg() + " -o " + out().string()).code, 0);
  std::string text = kSmallConfig;
  text.replace(text.find("fc:4"), 4, "fc:5");
  std::ofstream(dir_ / "other.ini") << text;
  EXPECT_EQ(run_cli("qat --config " + (dir_ / "other.ini").string() + " -o " + out().string()).code, 2);
}

TEST_F(CliTest, PruningSweepIsMonotone) {
  ASSERT_EQ(run_cli("train-float " + cfg() + " -o " + out().string()).code, 0);
  const RunResult r = run_cli("sweep-pruning " + cfg() + " -o " + out().string() + " --pf-list 0,0.5,1,2");
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(read_file(out() / kSweepFile));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kSweepHeader);
  std::vector<double> zf;
  while (std::getline(in, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    zf.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
  }
  ASSERT_EQ(zf.size(), 4u);
  EXPECT_EQ(zf[0], 0.0);
  for (std::size_t i = 1; i < zf.size(); ++i) EXPECT_GE(zf[i], zf[i - 1]);
  EXPECT_GT(zf.back(), 0.0);
}

// Recorded on the first desk run: 357 of 359 validation digits.
constexpr double kDeskFloatBaseline = 0.9944;
constexpr double kDeskBaselineTolerance = 2.0 / 359;

TEST_F(CliTest, DeskFloatBaseline) {
  const RunResult r = run_cli("train-float --config " POTQ_CONFIG_DIR "/desk.ini -o " + out().string());
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(read_file(out() / kFloatMetricsFile));
  std::string line, last_val;
  while (std::getline(in, line)) {
    if (line.find(",val,") != std::string::npos) last_val = line;
  }
  std::vector<std::string> fields;
  std::istringstream row(last_val);
  for (std::string f; std::getline(row, f, ',');) fields.push_back(f);
  ASSERT_EQ(fields.size(), 6u);
  EXPECT_EQ(fields[0], "14");
  const double acc = std::stod(fields[3]);
  EXPECT_NEAR(acc, kDeskFloatBaseline, kDeskBaselineTolerance) << last_val;
}

}  // namespace
}  // namespace potq
