/*
 * Copyright 2026 The sphereml Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sphereml/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sphereml {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size()) {
    throw ConfigError("config key '" + key + "': bad number '" + text + "'");
  }
  return v;
}

long to_long(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (text.empty() || pos != text.size()) {
    throw ConfigError("config key '" + key + "': bad integer '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ConfigError("config key '" + key + "': expected on/off, got '" + text +
                    "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream ls(text);
  while (std::getline(ls, item, ',')) items.push_back(trim(item));
  return items;
}

struct KeyTable {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  const std::string& get(const std::string& key) const {
    return values.at(key);
  }
  void set_default(const std::string& key, const std::string& value) {
    values.emplace(key, value);
  }
};

const char* kKnownKeys[] = {
    "variant",        "embedding_dim",   "dropout",
    "backbone_depth", "backbone_width",  "loss",
    "scale",          "bias",            "sampling",
    "p",              "k",               "batch_size",
    "total_epochs",   "warmup_epochs",   "warmup_start_lr",
    "base_lr",        "decay_epochs",    "decay_lrs",
    "adam_beta1",     "adam_beta2",      "adam_epsilon",
    "seed",           "eval_every",      "camera_exclusion",
    "metric",         "synthetic_identities",
    "synthetic_min_count",  "synthetic_max_count",
    "synthetic_dim",        "synthetic_center_scale",
    "synthetic_noise",      "synthetic_cameras",
    "synthetic_queries_per_id", "synthetic_gallery_per_id",
    "synthetic_seed",
};

void fill_defaults(KeyTable& table, bool synthetic_mode) {
  // stock setting
  table.set_default("variant", "D");
  table.set_default("embedding_dim", synthetic_mode ? "16" : "1024");
  table.set_default("dropout", "0.25");
  table.set_default("backbone_depth", "1");
  table.set_default("backbone_width", "64");
  table.set_default("loss", "sphere");
  table.set_default("scale", "14");
  table.set_default("bias", "on");
  table.set_default("sampling", "balanced");
  table.set_default("p", "16");
  table.set_default("k", "4");
  table.set_default("batch_size", "64");
  if (synthetic_mode) {
    // schedule scaled to the desk-sized run
    table.set_default("total_epochs", "40");
    table.set_default("warmup_epochs", "6");
    table.set_default("decay_epochs", "23,29");
  } else {
    table.set_default("total_epochs", "140");
    table.set_default("warmup_epochs", "20");
    table.set_default("decay_epochs", "80,100");
  }
  table.set_default("warmup_start_lr", "5e-5");
  table.set_default("base_lr", "1e-3");
  table.set_default("decay_lrs", "1e-4,1e-5");
  table.set_default("adam_beta1", "0.9");
  table.set_default("adam_beta2", "0.99");
  table.set_default("adam_epsilon", "1e-8");
  table.set_default("seed", "42");
  table.set_default("eval_every", "0");
  table.set_default("camera_exclusion", "on");
  table.set_default("metric", "cosine");
  table.set_default("synthetic_identities", "32");
  table.set_default("synthetic_min_count", "2");
  table.set_default("synthetic_max_count", "40");
  table.set_default("synthetic_dim", "32");
  table.set_default("synthetic_center_scale", "1.0");
  table.set_default("synthetic_noise", "0.02");
  table.set_default("synthetic_cameras", "2");
  table.set_default("synthetic_queries_per_id", "2");
  table.set_default("synthetic_gallery_per_id", "2");
  table.set_default("synthetic_seed", "7");
}

int to_positive_int(const std::string& key, const std::string& text) {
  const long v = to_long(key, text);
  if (v < 1) throw ConfigError("config key '" + key + "' must be >= 1");
  return static_cast<int>(v);
}

}  // namespace

ConfigFile parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ConfigFile file;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    }
    if (!file.values.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
  }
  return file;
}

ResolvedConfig resolve_config(const ConfigFile& file, bool synthetic_mode) {
  for (const auto& [key, _] : file.values) {
    if (std::find_if(std::begin(kKnownKeys), std::end(kKnownKeys),
                     [&](const char* k) { return key == k; }) ==
        std::end(kKnownKeys)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  KeyTable table;
  table.values = file.values;
  fill_defaults(table, synthetic_mode);

  ResolvedConfig out;
  ExperimentConfig& exp = out.experiment;

  const std::string variant = table.get("variant");
  if (variant.size() != 1 || variant[0] < 'A' || variant[0] > 'D') {
    throw ConfigError("config key 'variant' must be one of A, B, C, D");
  }
  exp.head.variant = variant[0];
  exp.head.embedding_dim =
      to_positive_int("embedding_dim", table.get("embedding_dim"));
  exp.head.dropout_ratio = to_double("dropout", table.get("dropout"));
  if (!(exp.head.dropout_ratio >= 0.0 && exp.head.dropout_ratio < 1.0)) {
    throw ConfigError("config key 'dropout' must lie in [0,1)");
  }
  exp.backbone_depth =
      static_cast<int>(to_long("backbone_depth", table.get("backbone_depth")));
  if (exp.backbone_depth < 0) {
    throw ConfigError("config key 'backbone_depth' must be >= 0");
  }
  exp.backbone_width =
      to_positive_int("backbone_width", table.get("backbone_width"));

  const std::string loss = table.get("loss");
  if (loss == "sphere") {
    exp.loss_kind = LossKind::kSphere;
  } else if (loss == "softmax") {
    exp.loss_kind = LossKind::kSoftmax;
  } else {
    throw ConfigError("config key 'loss' must be sphere or softmax");
  }
  exp.scale = to_double("scale", table.get("scale"));
  if (!(exp.scale > 0.0)) throw ConfigError("config key 'scale' must be > 0");
  exp.bias = to_bool("bias", table.get("bias"));

  const std::string sampling = table.get("sampling");
  if (sampling == "balanced") {
    exp.balanced = true;
  } else if (sampling == "imbalanced") {
    exp.balanced = false;
  } else {
    throw ConfigError("config key 'sampling' must be balanced or imbalanced");
  }
  exp.sampler.num_identities_per_batch = to_positive_int("p", table.get("p"));
  exp.sampler.instances_per_identity = to_positive_int("k", table.get("k"));
  exp.imbalanced_batch_size =
      to_positive_int("batch_size", table.get("batch_size"));

  exp.total_epochs = to_positive_int("total_epochs", table.get("total_epochs"));
  exp.schedule.total_epochs = exp.total_epochs;
  exp.schedule.warmup_epochs = static_cast<int>(
      to_long("warmup_epochs", table.get("warmup_epochs")));
  if (exp.schedule.warmup_epochs < 0) {
    throw ConfigError("config key 'warmup_epochs' must be >= 0");
  }
  exp.schedule.warmup_start_lr =
      to_double("warmup_start_lr", table.get("warmup_start_lr"));
  exp.schedule.base_lr = to_double("base_lr", table.get("base_lr"));

  const std::vector<std::string> decay_epochs =
      split_list(table.get("decay_epochs"));
  const std::vector<std::string> decay_lrs = split_list(table.get("decay_lrs"));
  if (decay_epochs.size() != decay_lrs.size()) {
    throw ConfigError(
        "config keys 'decay_epochs' and 'decay_lrs' must list the same "
        "number of entries");
  }
  exp.schedule.decay_points.clear();
  for (std::size_t i = 0; i < decay_epochs.size(); ++i) {
    if (decay_epochs[i].empty()) continue;  // "decay_epochs =" disables decays
    exp.schedule.decay_points.emplace_back(
        static_cast<int>(to_long("decay_epochs", decay_epochs[i])),
        to_double("decay_lrs", decay_lrs[i]));
  }

  exp.adam_beta1 = to_double("adam_beta1", table.get("adam_beta1"));
  exp.adam_beta2 = to_double("adam_beta2", table.get("adam_beta2"));
  exp.adam_epsilon = to_double("adam_epsilon", table.get("adam_epsilon"));
  if (!(exp.adam_beta1 >= 0.0 && exp.adam_beta1 < 1.0) ||
      !(exp.adam_beta2 >= 0.0 && exp.adam_beta2 < 1.0)) {
    throw ConfigError("config keys 'adam_beta1'/'adam_beta2' must lie in [0,1)");
  }
  if (!(exp.adam_epsilon > 0.0)) {
    throw ConfigError("config key 'adam_epsilon' must be > 0");
  }

  exp.seed = static_cast<std::uint64_t>(to_long("seed", table.get("seed")));
  exp.eval_every =
      static_cast<int>(to_long("eval_every", table.get("eval_every")));
  if (exp.eval_every < 0) {
    throw ConfigError("config key 'eval_every' must be >= 0");
  }
  exp.protocol.camera_exclusion =
      to_bool("camera_exclusion", table.get("camera_exclusion"));
  const std::string metric = table.get("metric");
  if (metric == "cosine") {
    exp.protocol.metric = Metric::kCosine;
  } else if (metric == "euclidean") {
    exp.protocol.metric = Metric::kEuclidean;
  } else {
    throw ConfigError("config key 'metric' must be cosine or euclidean");
  }

  SyntheticDatasetSpec& syn = out.synthetic;
  syn.num_identities = to_positive_int("synthetic_identities",
                                       table.get("synthetic_identities"));
  const int min_count =
      to_positive_int("synthetic_min_count", table.get("synthetic_min_count"));
  const int max_count =
      to_positive_int("synthetic_max_count", table.get("synthetic_max_count"));
  if (max_count < min_count) {
    throw ConfigError(
        "config key 'synthetic_max_count' must be >= synthetic_min_count");
  }
  syn.train_counts = skewed_counts(syn.num_identities, min_count, max_count);
  syn.dim = to_positive_int("synthetic_dim", table.get("synthetic_dim"));
  syn.center_scale =
      to_double("synthetic_center_scale", table.get("synthetic_center_scale"));
  syn.noise_scale = to_double("synthetic_noise", table.get("synthetic_noise"));
  if (!(syn.noise_scale >= 0.0)) {
    throw ConfigError("config key 'synthetic_noise' must be >= 0");
  }
  syn.num_cameras =
      to_positive_int("synthetic_cameras", table.get("synthetic_cameras"));
  syn.queries_per_identity = to_positive_int(
      "synthetic_queries_per_id", table.get("synthetic_queries_per_id"));
  syn.gallery_per_identity = to_positive_int(
      "synthetic_gallery_per_id", table.get("synthetic_gallery_per_id"));
  syn.seed = static_cast<std::uint64_t>(
      to_long("synthetic_seed", table.get("synthetic_seed")));

  try {
    exp.validate();
    syn.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return out;
}

std::string default_config_text(bool synthetic_mode) {
  KeyTable table;
  fill_defaults(table, synthetic_mode);
  std::ostringstream out;
  for (const char* key : kKnownKeys) {
    out << key << " = " << table.get(key) << "\n";
  }
  return out.str();
}

}  // namespace sphereml
