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

#include "potq/config.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "potq/errors.h"
#include "potq/model.h"

namespace potq {

namespace {

namespace pt = boost::property_tree;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, const std::string& key) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("'" + key + "': cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

bool parse_bool(std::string_view text, const std::string& key) {
  text = trim(text);
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + std::string(text) + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const char* format_bool(bool b) { return b ? "true" : "false"; }

// Reads one section and rejects keys outside `allowed`.
class Section {
 public:
  Section(const pt::ptree& root, const std::string& name, std::set<std::string> allowed)
      : name_(name) {
    if (const auto child = root.get_child_optional(pt::ptree::path_type(name, '\0'))) {
      for (const auto& [key, value] : *child) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
        values_[key] = value.data();
      }
    }
  }

  const std::string* get(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }
  std::string qualified(const std::string& key) const { return name_ + "." + key; }

  void read(const std::string& key, std::string& out) const {
    if (const auto* v = get(key)) out = *v;
  }
  template <typename T>
  void read_number(const std::string& key, T& out) const {
    if (const auto* v = get(key)) out = parse_number<T>(*v, qualified(key));
  }
  void read_bool(const std::string& key, bool& out) const {
    if (const auto* v = get(key)) out = parse_bool(*v, qualified(key));
  }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
};

void read_sgd(const Section& s, SgdConfig& sgd, std::size_t& batch) {
  s.read_number("epochs", sgd.epochs);
  s.read_number("lr", sgd.base_lr);
  s.read_number("momentum", sgd.momentum);
  if (const auto* v = s.get("lr_schedule")) sgd.lr_schedule = parse_lr_schedule(*v);
  s.read_number("batch_size", batch);
}

void require_file(const ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (value.empty()) throw ConfigError("data." + key + " is required for this format");
  const auto p = c.resolve(value);
  if (!std::filesystem::exists(p)) {
    throw ConfigError("data." + key + ": '" + p.string() + "' does not exist");
  }
}

}  // namespace

DataFormat parse_data_format(std::string_view text) {
  if (text == "idx") return DataFormat::kIdx;
  if (text == "csv") return DataFormat::kCsv;
  if (text == "blobs") return DataFormat::kBlobs;
  throw ConfigError("unknown data format '" + std::string(text) + "'");
}

std::string_view to_string(DataFormat format) {
  switch (format) {
    case DataFormat::kIdx: return "idx";
    case DataFormat::kCsv: return "csv";
    case DataFormat::kBlobs: return "blobs";
  }
  return "?";
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return serialize_config(*this) == serialize_config(other);
}

std::string format_layer_schemes(const std::map<std::string, QuantScheme>& m) {
  std::string out;
  for (const auto& [k, v] : m) {
    if (!out.empty()) out += ',';
    out += k + ":" + format_scheme(v);
  }
  return out;
}

std::map<std::string, QuantScheme> parse_layer_schemes(std::string_view text) {
  std::map<std::string, QuantScheme> out;
  for (std::string_view item : split(text, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw ConfigError("layer_schemes entry '" + std::string(item) + "' is not layer:scheme");
    }
    const std::string layer(trim(item.substr(0, colon)));
    if (out.count(layer)) throw ConfigError("layer_schemes names '" + layer + "' twice");
    out[layer] = parse_scheme(trim(item.substr(colon + 1)));
  }
  return out;
}

std::string format_lr_schedule(const std::vector<std::pair<int, double>>& schedule) {
  std::string out;
  for (const auto& [epoch, mult] : schedule) {
    if (!out.empty()) out += ',';
    out += std::to_string(epoch) + ":" + format_double(mult);
  }
  return out;
}

std::vector<std::pair<int, double>> parse_lr_schedule(std::string_view text) {
  std::vector<std::pair<int, double>> out;
  for (std::string_view item : split(text, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("lr_schedule entry '" + std::string(item) + "' is not epoch:multiplier");
    }
    out.emplace_back(parse_number<int>(item.substr(0, colon), "lr_schedule"),
                     parse_number<double>(item.substr(colon + 1), "lr_schedule"));
  }
  return out;
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                              bool check_paths) {
  pt::ptree root;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config syntax: " + std::string(e.what()));
  }
  static const std::set<std::string> kSections = {"experiment", "model", "data",
                                                  "float",      "qat",   "inference"};
  for (const auto& [name, node] : root) {
    if (node.empty() && !node.data().empty()) {
      throw ConfigError("key '" + name + "' is outside any section");
    }
    if (!kSections.count(name)) throw ConfigError("unknown section [" + name + "]");
  }

  ExperimentConfig c;
  c.base_dir = base_dir;

  const Section exp(root, "experiment", {"version", "seed", "output_dir"});
  int version = ExperimentConfig::kVersion;
  exp.read_number("version", version);
  if (version != ExperimentConfig::kVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version));
  }
  exp.read_number("seed", c.seed);
  exp.read("output_dir", c.output_dir);

  const Section model(root, "model", {"architecture", "input"});
  model.read("architecture", c.architecture);
  model.read("input", c.input);
  std::vector<LayerSpec> layers;
  InputShape input;
  try {
    layers = parse_architecture(c.architecture);
    input = parse_input_shape(c.input);
    resolve_weight_layers(layers, input);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }

  const Section data(root, "data",
                     {"format", "train_images", "train_labels", "val_images", "val_labels",
                      "train_csv", "val_csv", "classes", "train_per_class", "val_per_class",
                      "noise"});
  if (const auto* v = data.get("format")) c.data.format = parse_data_format(*v);
  data.read("train_images", c.data.train_images);
  data.read("train_labels", c.data.train_labels);
  data.read("val_images", c.data.val_images);
  data.read("val_labels", c.data.val_labels);
  data.read("train_csv", c.data.train_csv);
  data.read("val_csv", c.data.val_csv);
  data.read_number("classes", c.data.classes);
  data.read_number("train_per_class", c.data.train_per_class);
  data.read_number("val_per_class", c.data.val_per_class);
  data.read_number("noise", c.data.noise);

  const Section fl(root, "float", {"epochs", "lr", "momentum", "lr_schedule", "batch_size"});
  read_sgd(fl, c.float_sgd, c.float_batch_size);

  const Section qat(root, "qat",
                    {"method", "scheme", "layer_schemes", "pf", "epochs", "lr", "momentum",
                     "lr_schedule", "batch_size", "quantize_first_layer", "quantize_last_layer"});
  if (const auto* v = qat.get("method")) c.qat.method = parse_qat_method(*v);
  if (const auto* v = qat.get("scheme")) c.qat.default_scheme = parse_scheme(*v);
  if (const auto* v = qat.get("layer_schemes")) c.qat.layer_schemes = parse_layer_schemes(*v);
  qat.read_number("pf", c.qat.prune.pf);
  read_sgd(qat, c.qat.sgd, c.qat.batch_size);
  qat.read_bool("quantize_first_layer", c.qat.quantize_first_layer);
  qat.read_bool("quantize_last_layer", c.qat.quantize_last_layer);

  const Section inf(root, "inference", {"overflow", "calibration_samples"});
  if (const auto* v = inf.get("overflow")) {
    try {
      c.overflow = parse_overflow_mode(*v);
    } catch (const Error& e) {
      throw ConfigError(std::string("inference.overflow: ") + e.what());
    }
  }
  inf.read_number("calibration_samples", c.calibration_samples);

  c.float_sgd.seed = c.seed;
  c.qat.sgd.seed = c.seed;
  c.float_sgd.validate();
  c.qat.sgd.validate();
  validate_scheme(c.qat.default_scheme);
  for (const auto& [k, s] : c.qat.layer_schemes) validate_scheme(s);
  if (c.qat.prune.pf < 0.0) throw ConfigError("qat.pf must be non-negative");
  if (c.float_batch_size == 0 || c.qat.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (c.calibration_samples == 0) throw ConfigError("inference.calibration_samples must be positive");
  if (c.data.format == DataFormat::kBlobs &&
      (c.data.classes < 2 || c.data.train_per_class == 0 || c.data.val_per_class == 0 ||
       c.data.noise < 0.0)) {
    throw ConfigError("data: blobs need >= 2 classes, positive sample counts, noise >= 0");
  }
  if (check_paths) {
    if (c.data.format == DataFormat::kIdx) {
      require_file(c, "train_images", c.data.train_images);
      require_file(c, "train_labels", c.data.train_labels);
      require_file(c, "val_images", c.data.val_images);
      require_file(c, "val_labels", c.data.val_labels);
    } else if (c.data.format == DataFormat::kCsv) {
      require_file(c, "train_csv", c.data.train_csv);
      require_file(c, "val_csv", c.data.val_csv);
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[experiment]\n"
     << "version = " << ExperimentConfig::kVersion << "\n"
     << "seed = " << c.seed << "\n"
     << "output_dir = " << c.output_dir << "\n\n";
  os << "[model]\n"
     << "architecture = " << c.architecture << "\n"
     << "input = " << c.input << "\n\n";
  os << "[data]\n"
     << "format = " << to_string(c.data.format) << "\n"
     << "train_images = " << c.data.train_images << "\n"
     << "train_labels = " << c.data.train_labels << "\n"
     << "val_images = " << c.data.val_images << "\n"
     << "val_labels = " << c.data.val_labels << "\n"
     << "train_csv = " << c.data.train_csv << "\n"
     << "val_csv = " << c.data.val_csv << "\n"
     << "classes = " << c.data.classes << "\n"
     << "train_per_class = " << c.data.train_per_class << "\n"
     << "val_per_class = " << c.data.val_per_class << "\n"
     << "noise = " << format_double(c.data.noise) << "\n\n";
  const auto sgd = [&os](const SgdConfig& s, std::size_t batch) {
    os << "epochs = " << s.epochs << "\n"
       << "lr = " << format_double(s.base_lr) << "\n"
       << "momentum = " << format_double(s.momentum) << "\n"
       << "lr_schedule = " << format_lr_schedule(s.lr_schedule) << "\n"
       << "batch_size = " << batch << "\n";
  };
  os << "[float]\n";
  sgd(c.float_sgd, c.float_batch_size);
  os << "\n[qat]\n"
     << "method = " << to_string(c.qat.method) << "\n"
     << "scheme = " << format_scheme(c.qat.default_scheme) << "\n"
     << "layer_schemes = " << format_layer_schemes(c.qat.layer_schemes) << "\n"
     << "pf = " << format_double(c.qat.prune.pf) << "\n";
  sgd(c.qat.sgd, c.qat.batch_size);
  os << "quantize_first_layer = " << format_bool(c.qat.quantize_first_layer) << "\n"
     << "quantize_last_layer = " << format_bool(c.qat.quantize_last_layer) << "\n\n";
  os << "[inference]\n"
     << "overflow = " << to_string(c.overflow) << "\n"
     << "calibration_samples = " << c.calibration_samples << "\n";
  return os.str();
}

DataSplits load_data(const ExperimentConfig& c) {
  const InputShape shape = parse_input_shape(c.input);
  DataSplits d;
  switch (c.data.format) {
    case DataFormat::kIdx:
      d.train = read_idx(c.resolve(c.data.train_images), c.resolve(c.data.train_labels));
      d.val = read_idx(c.resolve(c.data.val_images), c.resolve(c.data.val_labels));
      break;
    case DataFormat::kCsv:
      d.train = read_csv(c.resolve(c.data.train_csv), shape);
      d.val = read_csv(c.resolve(c.data.val_csv), shape);
      break;
    case DataFormat::kBlobs: {
      BlobsConfig b;
      b.classes = c.data.classes;
      b.shape = shape;
      b.noise = c.data.noise;
      b.samples_per_class = c.data.train_per_class;
      b.seed = c.seed;
      d.train = make_gaussian_blobs(b);
      b.samples_per_class = c.data.val_per_class;
      b.seed = c.seed + 0x9e3779b97f4a7c15ULL;
      d.val = make_gaussian_blobs(b);
      break;
    }
  }
  if (d.train.shape != shape || d.val.shape != shape) {
    throw ConfigError("dataset samples are " + format_input_shape(d.train.shape) +
                      ", model input is " + c.input);
  }
  return d;
}

}  // namespace potq
