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

#ifndef SPHEREML_CHECKPOINT_HPP_
#define SPHEREML_CHECKPOINT_HPP_

#include <Eigen/Dense>
#include <map>
#include <string>

namespace sphereml {

// Flat key -> tensor container with a small string metadata section.
// Textual, one row per line, 17 significant digits so every double
// round-trips bit-exactly.

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, Eigen::MatrixXd> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Throws ParseError on malformed files, SchemaError on a bad magic line.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sphereml

#endif  // SPHEREML_CHECKPOINT_HPP_
