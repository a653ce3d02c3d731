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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "sphereml/checkpoint.hpp"
#include "sphereml/errors.hpp"

using namespace sphereml;
namespace fs = std::filesystem;

TEST_CASE("checkpoints round-trip tensors bit-exactly") {
  const fs::path dir = "ckpt_test_tmp";
  fs::remove_all(dir);
  fs::create_directories(dir);

  std::mt19937_64 rng(61);
  Checkpoint ckpt;
  ckpt.meta["variant"] = "D";
  ckpt.meta["scale"] = "14";
  // awkward magnitudes that expose lossy formatting
  ckpt.tensors["head.0.gamma"] = gradcheck::random_matrix(7, 1, rng, -1e-7, 1e-7);
  ckpt.tensors["head.2.weight"] = gradcheck::random_matrix(5, 9, rng, -1e6, 1e6);
  ckpt.tensors["loss.weight"] =
      gradcheck::random_matrix(3, 3, rng).array() + 1.0 / 3.0;

  const std::string path = (dir / "model.txt").string();
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);

  CHECK(back.meta == ckpt.meta);
  REQUIRE(back.tensors.size() == ckpt.tensors.size());
  for (const auto& [key, t] : ckpt.tensors) {
    REQUIRE(back.tensors.count(key) == 1);
    const Eigen::MatrixXd& b = back.tensors.at(key);
    REQUIRE(b.rows() == t.rows());
    REQUIRE(b.cols() == t.cols());
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        CHECK(b(i, j) == t(i, j));  // bit-exact
      }
    }
  }

  // a second save of the loaded copy is byte-identical
  const std::string path2 = (dir / "model2.txt").string();
  save_checkpoint(path2, back);
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("checkpoint loader rejects malformed files") {
  const fs::path dir = "ckpt_test_tmp";
  fs::create_directories(dir);

  auto spit = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name);
    out << text;
    return (dir / name).string();
  };

  CHECK_THROWS_AS(load_checkpoint((dir / "missing.txt").string()), ParseError);
  CHECK_THROWS_AS(load_checkpoint(spit("magic.txt", "not a checkpoint\n")),
                  SchemaError);
  CHECK_THROWS_AS(
      load_checkpoint(spit("trunc.txt", "smlckpt 1\ntensor w 2 2\n1 2\n")),
      ParseError);
  CHECK_THROWS_AS(
      load_checkpoint(spit("junk.txt", "smlckpt 1\nblob w 1 1\n0\n")),
      ParseError);
}
