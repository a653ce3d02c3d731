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

#ifndef SPHEREML_CONFIG_HPP_
#define SPHEREML_CONFIG_HPP_

#include <map>
#include <string>

#include "sphereml/train.hpp"

// Flat key=value experiment configuration. Unknown keys are rejected and
// every value is validated before any work starts. Defaults reproduce the
// stock setting (variant D, sphere loss, s=14, P=16/K=4, dropout 0.25,
// bias on, 140-epoch warmup schedule); runs on generated synthetic data
// default to a proportionally scaled 40-epoch schedule instead so the
// whole run stays desk-sized.

namespace sphereml {

struct ConfigFile {
  std::map<std::string, std::string> values;
};

/// Parses `key = value` lines ('#' comments and blank lines allowed).
/// Throws ConfigError on malformed lines or duplicate keys.
ConfigFile parse_config_file(const std::string& path);

struct ResolvedConfig {
  ExperimentConfig experiment;
  SyntheticDatasetSpec synthetic;
};

/// Applies `file` over the defaults. With `synthetic_mode` the desk-scale
/// overlay (40 epochs, warmup 6, decays 23/29, embedding 16) seeds any
/// schedule/embedding keys the file leaves unset. Throws ConfigError on
/// unknown keys or invalid values.
ResolvedConfig resolve_config(const ConfigFile& file, bool synthetic_mode);

/// The full key set with the defaults for the given mode, serialized in
/// config-file syntax (used by `config --dump` style tooling and tests).
std::string default_config_text(bool synthetic_mode);

}  // namespace sphereml

#endif  // SPHEREML_CONFIG_HPP_
