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

#ifndef SPHEREML_CLI_HPP_
#define SPHEREML_CLI_HPP_

#include <string>
#include <vector>

namespace sphereml::cli {

// Exit codes shared by the subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitDatasetError = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitCheckpointMismatch = 4;

/// Entry point behind main(); also callable in-process by tests.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace sphereml::cli

#endif  // SPHEREML_CLI_HPP_
