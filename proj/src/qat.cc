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

#include "potq/qat.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "potq/errors.h"
#include "potq/ops.h"

namespace potq {

namespace {

constexpr std::size_t kEvalBatch = 256;

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  auto d = logits.data();
  std::size_t correct = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const float* row = d.data() + r * k;
    const auto best = static_cast<int>(std::max_element(row, row + k) - row);
    if (best == labels[r]) ++correct;
  }
  return correct;
}

}  // namespace

QatMethod parse_qat_method(std::string_view text) {
  if (text == "ste") return QatMethod::kSte;
  if (text == "alr") return QatMethod::kAlr;
  throw ConfigError("unknown QAT method '" + std::string(text) + "' (expected ste or alr)");
}

std::string_view to_string(QatMethod method) {
  return method == QatMethod::kSte ? "ste" : "alr";
}

std::vector<QuantScheme> resolve_schemes(const Model& model, const QatConfig& config) {
  const auto& infos = model.weight_layers();
  std::set<std::string> known{"conv", "fc"};
  for (const auto& info : infos) known.insert(info.name);
  for (const auto& [key, scheme] : config.layer_schemes) {
    if (!known.count(key)) throw ConfigError("layer scheme for unknown layer '" + key + "'");
    validate_scheme(scheme);
  }
  validate_scheme(config.default_scheme);

  std::vector<QuantScheme> out;
  for (std::size_t i = 0; i < infos.size(); ++i) {
    const auto& info = infos[i];
    QuantScheme scheme = config.default_scheme;
    const std::string kind = info.kind == LayerKind::kConv2d ? "conv" : "fc";
    if (auto it = config.layer_schemes.find(kind); it != config.layer_schemes.end()) scheme = it->second;
    if (auto it = config.layer_schemes.find(info.name); it != config.layer_schemes.end()) {
      scheme = it->second;
    }
    if ((i == 0 && !config.quantize_first_layer) ||
        (i + 1 == infos.size() && !config.quantize_last_layer)) {
      scheme = FloatScheme{};
    }
    out.push_back(scheme);
  }
  return out;
}

double alr_scale(int code, int bits) {
  const int max_code = pot_max_code(bits);
  if (code < 0 || code > max_code) throw InputError("alr_scale: code out of range");
  return std::ldexp(1.0, max_code - code);
}

EvalResult evaluate_model(const Model& model, const Dataset& data) {
  if (data.size() == 0) throw InputError("evaluate: empty dataset");
  if (data.shape != model.input_shape()) throw DimensionError("evaluate: dataset shape mismatch");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < idx.size(); start += kEvalBatch) {
    const std::size_t n = std::min(kEvalBatch, idx.size() - start);
    std::span<const std::size_t> batch(idx.data() + start, n);
    const Tensor x = data.batch_images(batch);
    const std::vector<int> labels = data.batch_labels(batch);
    const Tensor logits = model.forward(x).clone();
    loss += static_cast<double>(cross_entropy(logits, labels).item()) * static_cast<double>(n);
    correct += count_correct(logits, labels);
  }
  return {loss / static_cast<double>(data.size()),
          static_cast<double>(correct) / static_cast<double>(data.size())};
}

double evaluate(const Model& model, const Dataset& data) { return evaluate_model(model, data).accuracy; }

double evaluate(const QuantizedModel& model, const Dataset& data) {
  return evaluate(to_float_model(model), data);
}

QatState::QatState(QatConfig config)
    : config_(std::move(config)), sgd_(config_.sgd.momentum), rng_(config_.sgd.seed) {
  config_.sgd.validate();
  if (config_.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (config_.prune.pf < 0.0) throw ConfigError("prune factor must be non-negative");
}

void QatState::initialize(Model pretrained) {
  schemes_ = resolve_schemes(pretrained, config_);
  model_.emplace(std::move(pretrained));
  sgd_.reset();
  requantize();
}

const Model& QatState::master() const {
  if (config_.method != QatMethod::kSte) throw StateError("ALR training keeps no master weights");
  return model();
}

const Model& QatState::model() const {
  if (!model_) throw StateError("QAT state has no pretrained weights");
  return *model_;
}

Model& QatState::mutable_model() {
  if (!model_) throw StateError("QAT state has no pretrained weights");
  return *model_;
}

void QatState::requantize() {
  Model& m = mutable_model();
  quantized_.clear();
  for (std::size_t i = 0; i < schemes_.size(); ++i) {
    quantized_.push_back(quantize(m.weights()[i], schemes_[i], config_.prune));
    if (config_.method == QatMethod::kAlr) dequantize_into(quantized_[i], m.weights()[i].mutable_data());
  }
}

QuantizedModel QatState::snapshot() const {
  const Model& m = model();
  QuantizedModel q;
  q.layers = m.layers();
  q.input = m.input_shape();
  q.weights = quantized_;
  for (const Tensor& b : m.biases()) q.biases.emplace_back(b.data().begin(), b.data().end());
  for (const Tensor& g : m.gains()) q.gains.emplace_back(g.data().begin(), g.data().end());
  q.activation_scales.assign(q.weights.size(), 0.0f);
  return q;
}

BatchStats QatState::ste_step(const Tensor& x, std::span<const int> labels, double lr) {
  if (config_.method != QatMethod::kSte) throw StateError("ste_step on an ALR state");
  Model& m = mutable_model();
  requantize();

  std::vector<Tensor> live;
  for (std::size_t i = 0; i < schemes_.size(); ++i) {
    live.push_back(is_float(schemes_[i]) ? m.weights()[i] : dequantize(quantized_[i]));
    live.back().set_requires_grad(true);
  }
  Tensor logits = m.forward(x, live);
  Tensor loss = cross_entropy(logits, labels);
  loss.backward();

  // Straight-through: d loss / d master = d loss / d W_Q.
  for (std::size_t i = 0; i < schemes_.size(); ++i) {
    if (is_float(schemes_[i])) continue;
    auto g = m.weights()[i].mutable_grad();
    auto src = live[i].grad();
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += src[j];
  }
  std::vector<Tensor> params = m.parameters();
  sgd_.step(params, lr);
  m.zero_grad();
  return {loss.item(), count_correct(logits, labels), labels.size()};
}

BatchStats QatState::alr_step(const Tensor& x, std::span<const int> labels, double lr) {
  if (config_.method != QatMethod::kAlr) throw StateError("alr_step on an STE state");
  Model& m = mutable_model();
  Tensor logits = m.forward(x);
  Tensor loss = cross_entropy(logits, labels);
  loss.backward();

  std::vector<std::vector<float>> scales(schemes_.size());
  std::vector<std::span<const float>> scale_spans;
  for (std::size_t i = 0; i < schemes_.size(); ++i) {
    if (const auto* pot = std::get_if<PotScheme>(&schemes_[i])) {
      const QuantizedLayer& q = quantized_[i];
      scales[i].resize(q.size());
      for (std::size_t j = 0; j < q.size(); ++j) {
        scales[i][j] = q.zero_mask[j] ? 1.0f : static_cast<float>(alr_scale(q.codes[j], pot->bits));
      }
    }
    scale_spans.emplace_back(scales[i]);
  }
  std::vector<Tensor> params = m.parameters();
  sgd_.step(params, lr, scale_spans);
  m.zero_grad();
  requantize();
  return {loss.item(), count_correct(logits, labels), labels.size()};
}

EpochMetrics QatState::ste_epoch(const Dataset& train, const Dataset* val) {
  if (config_.method != QatMethod::kSte) throw StateError("ste_epoch on an ALR state");
  return run_epoch(train, val, true);
}

EpochMetrics QatState::alr_epoch(const Dataset& train, const Dataset* val) {
  if (config_.method != QatMethod::kAlr) throw StateError("alr_epoch on an STE state");
  return run_epoch(train, val, false);
}

EpochMetrics QatState::run_epoch(const Dataset& train, const Dataset* val, bool ste) {
  if (!model_) throw StateError("QAT state has no pretrained weights");
  if (train.size() == 0) throw InputError("empty training set");
  const double lr = learning_rate(config_.sgd, epoch_);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t n = std::min(config_.batch_size, order.size() - start);
    std::span<const std::size_t> batch(order.data() + start, n);
    const Tensor x = train.batch_images(batch);
    const std::vector<int> labels = train.batch_labels(batch);
    const BatchStats s = ste ? ste_step(x, labels, lr) : alr_step(x, labels, lr);
    if (!std::isfinite(s.loss)) throw TrainingError(epoch_, "loss is not finite");
    loss_sum += s.loss * static_cast<double>(n);
    correct += s.correct;
  }
  requantize();

  EpochMetrics m;
  m.epoch = epoch_;
  m.train_loss = loss_sum / static_cast<double>(train.size());
  m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
  m.lr = lr;
  m.zero_fraction = snapshot().zero_fraction();
  if (val) {
    const EvalResult r = evaluate_model(to_float_model(snapshot()), *val);
    if (!std::isfinite(r.loss)) throw TrainingError(epoch_, "validation loss is not finite");
    m.val_loss = r.loss;
    m.val_accuracy = r.accuracy;
  }
  history_.push_back(m);
  ++epoch_;
  return m;
}

TrainResult train(const QatConfig& config, Model pretrained, const Dataset& train_data,
                  const Dataset& val_data) {
  if (train_data.size() == 0) throw InputError("train: empty training set");
  QatState state(config);
  state.initialize(std::move(pretrained));
  for (int e = 0; e < config.sgd.epochs; ++e) {
    if (config.method == QatMethod::kSte) {
      state.ste_epoch(train_data, &val_data);
    } else {
      state.alr_epoch(train_data, &val_data);
    }
  }
  return {state.snapshot(), state.model().clone(), state.history()};
}

TrainResult train_float(Model model, const SgdConfig& sgd, std::size_t batch_size,
                        const Dataset& train_data, const Dataset& val_data) {
  QatConfig config;
  config.method = QatMethod::kSte;
  config.default_scheme = FloatScheme{};
  config.sgd = sgd;
  config.batch_size = batch_size;
  return train(config, std::move(model), train_data, val_data);
}

}  // namespace potq
