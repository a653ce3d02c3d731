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

#include "sphereml/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "sphereml/errors.hpp"

namespace sphereml {

namespace {
constexpr const char* kMagic = "smlckpt 1";
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open checkpoint file for writing: " + path);
  out << kMagic << "\n";
  out << std::setprecision(17);
  for (const auto& [key, value] : ckpt.meta) {
    out << "meta " << key << " " << value << "\n";
  }
  for (const auto& [key, t] : ckpt.tensors) {
    out << "tensor " << key << " " << t.rows() << " " << t.cols() << "\n";
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        if (j) out << " ";
        out << t(i, j);
      }
      out << "\n";
    }
  }
  if (!out) throw ParseError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw SchemaError("not a checkpoint file (bad magic line): " + path);
  }
  Checkpoint ckpt;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key, value;
      ls >> key >> value;
      if (key.empty()) throw ParseError("malformed meta line: " + line);
      ckpt.meta[key] = value;
    } else if (tag == "tensor") {
      std::string key;
      Eigen::Index rows = 0, cols = 0;
      ls >> key >> rows >> cols;
      if (key.empty() || rows < 0 || cols < 0 || ls.fail()) {
        throw ParseError("malformed tensor header: " + line);
      }
      Eigen::MatrixXd t(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) {
          throw ParseError("truncated tensor " + key);
        }
        std::istringstream rs(line);
        for (Eigen::Index j = 0; j < cols; ++j) {
          if (!(rs >> t(i, j))) {
            throw ParseError("bad value in tensor " + key);
          }
        }
      }
      ckpt.tensors[key] = std::move(t);
    } else {
      throw ParseError("unknown checkpoint line: " + line);
    }
  }
  return ckpt;
}

}  // namespace sphereml
