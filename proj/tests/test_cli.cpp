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
#include <sstream>

#include "sphereml/cli.hpp"
#include "sphereml/config.hpp"
#include "sphereml/dataset.hpp"

using namespace sphereml;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path("cli_test_tmp") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  REQUIRE(out.good());
}

}  // namespace

TEST_CASE("cmd_train writes the full artifact set and perfect metrics") {
  const fs::path dir = fresh_dir("train_default");
  const int rc = cli::run({"train", "--synthetic", "--out",
                           (dir / "run").string()});
  CHECK(rc == cli::kExitOk);
  for (const char* name :
       {"train_log.csv", "timing.csv", "metrics.txt", "cmc.csv",
        "sampler_audit.txt", "checkpoint.txt", "dataset.csv"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir / "run" / name));
  }
  const std::string metrics = slurp(dir / "run" / "metrics.txt");
  CHECK(metrics.find("rank1=1.000") != std::string::npos);
  const std::string audit = slurp(dir / "run" / "sampler_audit.txt");
  CHECK(audit.find("violations 0") != std::string::npos);
}

TEST_CASE("cmd_train rejects P larger than the identity inventory") {
  const fs::path dir = fresh_dir("train_bad_p");
  spit(dir / "config.txt", "p = 64\n");
  const int rc =
      cli::run({"train", "--synthetic", "--config", (dir / "config.txt").string(),
                "--out", (dir / "run").string()});
  CHECK(rc == cli::kExitConfigError);
}

TEST_CASE("cmd_train exits 3 and keeps the partial log on divergence") {
  const fs::path dir = fresh_dir("train_divergence");
  spit(dir / "config.txt",
       "base_lr = 1e308\nwarmup_start_lr = 1e300\nwarmup_epochs = 6\n");
  const int rc = cli::run({"train", "--synthetic", "--config",
                           (dir / "config.txt").string(), "--out",
                           (dir / "run").string()});
  CHECK(rc == cli::kExitDivergence);
  CHECK(fs::exists(dir / "run" / "train_log.csv"));
}

TEST_CASE("cmd_train is byte-deterministic under a fixed seed") {
  const fs::path dir = fresh_dir("train_determinism");
  const int rc1 = cli::run({"train", "--synthetic", "--seed", "9",
                            "--out", (dir / "a").string()});
  const int rc2 = cli::run({"train", "--synthetic", "--seed", "9",
                            "--out", (dir / "b").string()});
  REQUIRE(rc1 == cli::kExitOk);
  REQUIRE(rc2 == cli::kExitOk);
  CHECK(slurp(dir / "a" / "train_log.csv") == slurp(dir / "b" / "train_log.csv"));
  CHECK(slurp(dir / "a" / "metrics.txt") == slurp(dir / "b" / "metrics.txt"));
  CHECK(slurp(dir / "a" / "cmc.csv") == slurp(dir / "b" / "cmc.csv"));
}

TEST_CASE("cmd_eval reproduces training metrics from the checkpoint") {
  const fs::path dir = fresh_dir("eval_roundtrip");
  REQUIRE(cli::run({"train", "--synthetic", "--out", (dir / "run").string()}) ==
          cli::kExitOk);
  const int rc = cli::run({"eval", "--checkpoint",
                           (dir / "run" / "checkpoint.txt").string(),
                           "--dataset", (dir / "run" / "dataset.csv").string(),
                           "--out", (dir / "eval").string()});
  CHECK(rc == cli::kExitOk);
  CHECK(slurp(dir / "run" / "metrics.txt") == slurp(dir / "eval" / "metrics.txt"));
}

TEST_CASE("cmd_eval protocol flags and failure exit codes") {
  const fs::path dir = fresh_dir("eval_flags");
  REQUIRE(cli::run({"train", "--synthetic", "--out", (dir / "run").string()}) ==
          cli::kExitOk);
  const std::string ckpt = (dir / "run" / "checkpoint.txt").string();
  const std::string dataset = (dir / "run" / "dataset.csv").string();

  SUBCASE("--no-camera-exclusion counts every query as valid") {
    REQUIRE(cli::run({"eval", "--checkpoint", ckpt, "--dataset", dataset,
                      "--out", (dir / "eval").string(),
                      "--no-camera-exclusion"}) == cli::kExitOk);
    const std::string metrics = slurp(dir / "eval" / "metrics.txt");
    CHECK(metrics.find("valid_queries=64") != std::string::npos);
  }

  SUBCASE("a dataset with a different dimension exits 4") {
    // rebuild the dataset with one feature column dropped
    FeatureDataset data = parse_feature_csv(dataset);
    FeatureDataset narrow = data;
    narrow.features = data.features.leftCols(data.dim() - 1);
    write_feature_csv((dir / "narrow.csv").string(), narrow);
    CHECK(cli::run({"eval", "--checkpoint", ckpt, "--dataset",
                    (dir / "narrow.csv").string(), "--out",
                    (dir / "eval2").string()}) == cli::kExitCheckpointMismatch);
  }

  SUBCASE("a dataset without query rows exits 2") {
    FeatureDataset data = parse_feature_csv(dataset);
    FeatureDataset no_query = data;
    for (Split& s : no_query.splits) {
      if (s == Split::kQuery) s = Split::kGallery;
    }
    write_feature_csv((dir / "noquery.csv").string(), no_query);
    CHECK(cli::run({"eval", "--checkpoint", ckpt, "--dataset",
                    (dir / "noquery.csv").string(), "--out",
                    (dir / "eval3").string()}) == cli::kExitDatasetError);
  }
}

TEST_CASE("cmd_ablate emits the expected grids") {
  const fs::path dir = fresh_dir("ablate");
  // a fast schedule keeps the 8-cell structure grid quick
  spit(dir / "config.txt",
       "total_epochs = 6\nwarmup_epochs = 2\ndecay_epochs = 4,5\n");

  SUBCASE("dropout axis runs exactly the four stock ratios") {
    REQUIRE(cli::run({"ablate", "--synthetic", "--axis", "dropout",
                      "--config", (dir / "config.txt").string(),
                      "--out", (dir / "dropout").string()}) == cli::kExitOk);
    const std::string csv = slurp(dir / "dropout" / "ablation.csv");
    CHECK(csv.find("dropout_0,") != std::string::npos);
    CHECK(csv.find("dropout_0.25,") != std::string::npos);
    CHECK(csv.find("dropout_0.5,") != std::string::npos);
    CHECK(csv.find("dropout_0.75,") != std::string::npos);
    for (const char* ratio : {"0", "0.25", "0.5", "0.75"}) {
      CHECK(fs::exists(dir / "dropout" / (std::string("dropout_") + ratio) /
                       "metrics.txt"));
    }
  }

  SUBCASE("structure axis emits 4 variants x 2 losses") {
    REQUIRE(cli::run({"ablate", "--synthetic", "--axis", "structure",
                      "--config", (dir / "config.txt").string(),
                      "--out", (dir / "structure").string()}) == cli::kExitOk);
    int cells = 0;
    for (char v : {'A', 'B', 'C', 'D'}) {
      for (const char* loss : {"sphere", "softmax"}) {
        const fs::path cell = dir / "structure" /
                              (std::string("network-") + v + "_" + loss);
        if (fs::exists(cell / "metrics.txt")) ++cells;
      }
    }
    CHECK(cells == 8);
    const std::string table = slurp(dir / "structure" / "ablation.txt");
    CHECK(table.find("network-A") != std::string::npos);
    CHECK(table.find("Sphere") != std::string::npos);
    CHECK(table.find("Softmx") != std::string::npos);
  }

  SUBCASE("bias axis runs the on/off pair") {
    REQUIRE(cli::run({"ablate", "--synthetic", "--axis", "bias",
                      "--config", (dir / "config.txt").string(),
                      "--out", (dir / "bias").string()}) == cli::kExitOk);
    CHECK(fs::exists(dir / "bias" / "with_bias" / "metrics.txt"));
    CHECK(fs::exists(dir / "bias" / "without_bias" / "metrics.txt"));
    const std::string table = slurp(dir / "bias" / "ablation.txt");
    CHECK(table.find("w/ bias") != std::string::npos);
    CHECK(table.find("w/o bias") != std::string::npos);
  }

  SUBCASE("sampling axis runs the three stock rows") {
    REQUIRE(cli::run({"ablate", "--synthetic", "--axis", "sampling",
                      "--config", (dir / "config.txt").string(),
                      "--out", (dir / "sampling").string()}) == cli::kExitOk);
    const std::string table = slurp(dir / "sampling" / "ablation.txt");
    CHECK(table.find("balanced, w/ warming-up") != std::string::npos);
    CHECK(table.find("imbalanced, w/ warming-up") != std::string::npos);
    CHECK(table.find("balanced, w/o warming-up") != std::string::npos);
  }
}

TEST_CASE("gen-synthetic writes a parseable dataset") {
  const fs::path dir = fresh_dir("gen");
  REQUIRE(cli::run({"gen-synthetic", "--out", (dir / "data.csv").string()}) ==
          cli::kExitOk);
  const FeatureDataset data = parse_feature_csv((dir / "data.csv").string());
  CHECK(data.dim() == 32);
  CHECK(data.train_index().num_identities() == 32);
}

TEST_CASE("parse_feature_csv: minimal file, bad rows, round trip") {
  const fs::path dir = fresh_dir("csv");

  SUBCASE("two-row minimal file") {
    spit(dir / "mini.csv",
         "sample_id,identity,camera,split,f0,f1\n"
         "a,0,0,train,0.5,-1.25\n"
         "b,1,1,query,2.0,3.5\n");
    const FeatureDataset data = parse_feature_csv((dir / "mini.csv").string());
    REQUIRE(data.num_samples() == 2);
    CHECK(data.dim() == 2);
    CHECK(data.sample_ids[0] == "a");
    CHECK(data.identities[1] == 1);
    CHECK(data.splits[0] == Split::kTrain);
    CHECK(data.splits[1] == Split::kQuery);
    CHECK(data.features(0, 1) == -1.25);
  }

  SUBCASE("a short row names its line number") {
    spit(dir / "short.csv",
         "sample_id,identity,camera,split,f0,f1\n"
         "a,0,0,train,0.5,1.0\n"
         "b,1,1,query,2.0\n");
    CHECK_THROWS_WITH_AS(parse_feature_csv((dir / "short.csv").string()),
                         doctest::Contains("line 3"), ParseError);
  }

  SUBCASE("a bad header names the offending column") {
    spit(dir / "head.csv", "sample_id,identity,camera,flavor,f0\n");
    CHECK_THROWS_AS(parse_feature_csv((dir / "head.csv").string()),
                    SchemaError);
    spit(dir / "head2.csv", "sample_id,identity,camera,split,g0\n");
    CHECK_THROWS_WITH_AS(parse_feature_csv((dir / "head2.csv").string()),
                         doctest::Contains("f0"), SchemaError);
  }

  SUBCASE("write-then-parse reproduces a synthetic dataset exactly") {
    SyntheticDatasetSpec spec;
    spec.train_counts = skewed_counts(spec.num_identities, 2, 40);
    const FeatureDataset data = generate_synthetic(spec);
    write_feature_csv((dir / "round.csv").string(), data);
    const FeatureDataset back = parse_feature_csv((dir / "round.csv").string());
    REQUIRE(back.num_samples() == data.num_samples());
    REQUIRE(back.dim() == data.dim());
    CHECK((back.features - data.features).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(back.identities == data.identities);
    CHECK(back.cameras == data.cameras);
  }
}

TEST_CASE("config files reject unknown keys and malformed values") {
  const fs::path dir = fresh_dir("config");
  spit(dir / "bad_key.txt", "warp_speed = 9\n");
  CHECK_THROWS_AS(
      resolve_config(parse_config_file((dir / "bad_key.txt").string()), true),
      ConfigError);

  spit(dir / "bad_value.txt", "scale = fourteen\n");
  CHECK_THROWS_AS(
      resolve_config(parse_config_file((dir / "bad_value.txt").string()), true),
      ConfigError);

  spit(dir / "dup.txt", "scale = 14\nscale = 15\n");
  CHECK_THROWS_AS(parse_config_file((dir / "dup.txt").string()), ConfigError);

  spit(dir / "ok.txt", "# comment\nscale = 20\nvariant = C\n");
  const ResolvedConfig resolved =
      resolve_config(parse_config_file((dir / "ok.txt").string()), false);
  CHECK(resolved.experiment.scale == 20.0);
  CHECK(resolved.experiment.head.variant == 'C');
  // untouched defaults reproduce the stock setting
  CHECK(resolved.experiment.sampler.num_identities_per_batch == 16);
  CHECK(resolved.experiment.sampler.instances_per_identity == 4);
  CHECK(resolved.experiment.head.dropout_ratio == 0.25);
  CHECK(resolved.experiment.bias == true);
  CHECK(resolved.experiment.total_epochs == 140);
  CHECK(resolved.experiment.schedule.warmup_epochs == 20);
}

TEST_CASE("the desk-scale synthetic overlay only fills unset keys") {
  ConfigFile empty;
  const ResolvedConfig desk = resolve_config(empty, true);
  CHECK(desk.experiment.total_epochs == 40);
  CHECK(desk.experiment.schedule.warmup_epochs == 6);
  REQUIRE(desk.experiment.schedule.decay_points.size() == 2);
  CHECK(desk.experiment.schedule.decay_points[0].first == 23);
  CHECK(desk.experiment.schedule.decay_points[1].first == 29);
  CHECK(desk.experiment.head.embedding_dim == 16);
  // paper-scale keys survive when given explicitly
  ConfigFile file;
  file.values["total_epochs"] = "140";
  file.values["warmup_epochs"] = "20";
  file.values["decay_epochs"] = "80,100";
  const ResolvedConfig forced = resolve_config(file, true);
  CHECK(forced.experiment.total_epochs == 140);
  CHECK(forced.experiment.schedule.warmup_epochs == 20);
}
