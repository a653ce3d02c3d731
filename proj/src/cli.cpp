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

#include "sphereml/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "sphereml/checkpoint.hpp"
#include "sphereml/config.hpp"
#include "sphereml/train.hpp"

namespace sphereml::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string dataset_path;
  bool synthetic = false;
  std::string out_dir;
  std::optional<long> seed;
  std::optional<int> eval_every;
  bool no_camera_exclusion = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw ParseError("failed writing " + path.string());
}

ResolvedConfig load_config(const CommonOpts& opts) {
  ConfigFile file;
  if (!opts.config_path.empty()) {
    file = parse_config_file(opts.config_path);
  }
  ResolvedConfig resolved = resolve_config(file, opts.synthetic);
  if (opts.seed) {
    resolved.experiment.seed = static_cast<std::uint64_t>(*opts.seed);
  }
  if (opts.eval_every) resolved.experiment.eval_every = *opts.eval_every;
  if (opts.no_camera_exclusion) {
    resolved.experiment.protocol.camera_exclusion = false;
  }
  return resolved;
}

FeatureDataset load_dataset(const CommonOpts& opts,
                            const ResolvedConfig& resolved) {
  if (opts.synthetic) return generate_synthetic(resolved.synthetic);
  return parse_feature_csv(opts.dataset_path);
}

std::string checkpoint_meta_value(const Checkpoint& ckpt,
                                  const std::string& key) {
  auto it = ckpt.meta.find(key);
  if (it == ckpt.meta.end()) {
    throw ShapeMismatch("checkpoint missing meta key '" + key + "'");
  }
  return it->second;
}

Checkpoint make_checkpoint(const ExperimentConfig& config, int data_dim,
                           Model& model) {
  Checkpoint ckpt;
  ckpt.meta["format"] = "1";
  ckpt.meta["variant"] = std::string(1, config.head.variant);
  ckpt.meta["embedding_dim"] = std::to_string(config.head.embedding_dim);
  std::ostringstream dropout;
  dropout << std::setprecision(17) << config.head.dropout_ratio;
  ckpt.meta["dropout"] = dropout.str();
  ckpt.meta["backbone_depth"] = std::to_string(config.backbone_depth);
  ckpt.meta["backbone_width"] = std::to_string(config.backbone_width);
  ckpt.meta["loss"] =
      config.loss_kind == LossKind::kSphere ? "sphere" : "softmax";
  std::ostringstream scale;
  scale << std::setprecision(17) << config.scale;
  ckpt.meta["scale"] = scale.str();
  ckpt.meta["bias"] = config.bias ? "on" : "off";
  ckpt.meta["input_dim"] = std::to_string(data_dim);
  ckpt.meta["num_classes"] = std::to_string(model.loss->num_classes());
  ckpt.tensors = model.stack.export_tensors();
  for (Parameter* p : model.loss->parameters()) {
    ckpt.tensors["loss." + p->name] = p->value;
  }
  return ckpt;
}

/// Runs one experiment and writes the per-run artifact set into out_dir.
RetrievalReport run_and_write(const ExperimentConfig& config,
                              const FeatureDataset& data,
                              const fs::path& out_dir, bool write_dataset) {
  fs::create_directories(out_dir);
  TrainLog partial;
  ExperimentResult result;
  try {
    result = run_experiment(config, data, &partial);
  } catch (const DivergenceDetected&) {
    write_text(out_dir / "train_log.csv", partial.train_csv());
    throw;
  }

  write_text(out_dir / "train_log.csv", result.log.train_csv());
  write_text(out_dir / "timing.csv", result.log.timing_csv());
  write_text(out_dir / "metrics.txt", result.report.to_text());
  write_text(out_dir / "cmc.csv", result.report.cmc_csv());
  if (config.eval_every > 0) {
    write_text(out_dir / "eval_history.csv", result.log.eval_history_csv());
  }

  std::ostringstream audit;
  if (config.balanced) {
    audit << "# last-epoch balanced sampling audit\n"
          << result.final_audit.to_text();
  } else {
    audit << "# imbalanced sampling (no PK invariants)\n";
  }
  audit << "# cumulative per-identity exposure over the run\n";
  audit << "identity exposure\n";
  for (const auto& [id, count] : result.exposure) {
    audit << id << " " << count << "\n";
  }
  write_text(out_dir / "sampler_audit.txt", audit.str());

  save_checkpoint((out_dir / "checkpoint.txt").string(),
                  make_checkpoint(config, data.dim(), result.model));
  if (write_dataset) {
    write_feature_csv((out_dir / "dataset.csv").string(), data);
  }
  return result.report;
}

int cmd_train(const CommonOpts& opts) {
  ResolvedConfig resolved;
  try {
    resolved = load_config(opts);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  FeatureDataset data;
  try {
    data = load_dataset(opts, resolved);
  } catch (const Error& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitDatasetError;
  }
  try {
    const RetrievalReport report = run_and_write(
        resolved.experiment, data, opts.out_dir, opts.synthetic);
    std::cout << report.to_text();
    return kExitOk;
  } catch (const DivergenceDetected& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitDatasetError;
  }
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_path,
             const std::string& out_dir, bool no_camera_exclusion,
             const std::string& metric_name) {
  FeatureDataset data;
  try {
    data = parse_feature_csv(dataset_path);
  } catch (const Error& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitDatasetError;
  }
  if (data.rows_of(Split::kQuery).empty() ||
      data.rows_of(Split::kGallery).empty()) {
    std::cerr << "dataset error: dataset needs query and gallery splits\n";
    return kExitDatasetError;
  }

  try {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);

    ExperimentConfig config;
    const std::string variant = checkpoint_meta_value(ckpt, "variant");
    if (variant.size() != 1) {
      throw ShapeMismatch("checkpoint meta 'variant' malformed");
    }
    config.head.variant = variant[0];
    config.head.embedding_dim =
        std::stoi(checkpoint_meta_value(ckpt, "embedding_dim"));
    config.head.dropout_ratio =
        std::stod(checkpoint_meta_value(ckpt, "dropout"));
    config.backbone_depth =
        std::stoi(checkpoint_meta_value(ckpt, "backbone_depth"));
    config.backbone_width =
        std::stoi(checkpoint_meta_value(ckpt, "backbone_width"));
    config.loss_kind = checkpoint_meta_value(ckpt, "loss") == "softmax"
                           ? LossKind::kSoftmax
                           : LossKind::kSphere;
    config.scale = std::stod(checkpoint_meta_value(ckpt, "scale"));
    config.bias = checkpoint_meta_value(ckpt, "bias") == "on";
    const int input_dim = std::stoi(checkpoint_meta_value(ckpt, "input_dim"));
    const int num_classes =
        std::stoi(checkpoint_meta_value(ckpt, "num_classes"));
    if (data.dim() != input_dim) {
      std::ostringstream msg;
      msg << "dataset dimension " << data.dim()
          << " does not match checkpoint input_dim " << input_dim;
      throw ShapeMismatch(msg.str());
    }

    Model model = build_model(config, input_dim, num_classes);
    model.stack.import_tensors(ckpt.tensors);
    model.stack.set_mode(Mode::kEval);

    EvalProtocol protocol;
    protocol.camera_exclusion = !no_camera_exclusion;
    if (metric_name == "euclidean") protocol.metric = Metric::kEuclidean;

    const std::vector<int> query_rows = data.rows_of(Split::kQuery);
    const std::vector<int> gallery_rows = data.rows_of(Split::kGallery);
    Eigen::MatrixXd qf(query_rows.size(), data.dim());
    for (std::size_t i = 0; i < query_rows.size(); ++i) {
      qf.row(i) = data.features.row(query_rows[i]);
    }
    Eigen::MatrixXd gf(gallery_rows.size(), data.dim());
    for (std::size_t i = 0; i < gallery_rows.size(); ++i) {
      gf.row(i) = data.features.row(gallery_rows[i]);
    }
    const Eigen::MatrixXd qe = embed_dataset(model.stack, qf);
    const Eigen::MatrixXd ge = embed_dataset(model.stack, gf);
    const RetrievalReport report =
        evaluate(make_entries(qe, data, query_rows),
                 make_entries(ge, data, gallery_rows), protocol);

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "metrics.txt", report.to_text());
    write_text(fs::path(out_dir) / "cmc.csv", report.cmc_csv());
    std::cout << report.to_text();
    return kExitOk;
  } catch (const NoValidQueries& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitDatasetError;
  } catch (const std::exception& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpointMismatch;
  }
}

struct AblationCell {
  std::string label;
  ExperimentConfig config;
};

std::vector<AblationCell> ablation_cells(const std::string& axis,
                                         const ExperimentConfig& base) {
  std::vector<AblationCell> cells;
  if (axis == "structure") {
    for (char variant : {'A', 'B', 'C', 'D'}) {
      for (LossKind kind : {LossKind::kSphere, LossKind::kSoftmax}) {
        ExperimentConfig c = base;
        c.head.variant = variant;
        c.loss_kind = kind;
        std::string label = std::string("network-") + variant + "_" +
                            (kind == LossKind::kSphere ? "sphere" : "softmax");
        cells.push_back({label, c});
      }
    }
  } else if (axis == "sampling" || axis == "warmup") {
    ExperimentConfig balanced_warmup = base;
    balanced_warmup.balanced = true;
    ExperimentConfig imbalanced = base;
    imbalanced.balanced = false;
    ExperimentConfig no_warmup = base;
    no_warmup.balanced = true;
    no_warmup.schedule.warmup_epochs = 0;
    no_warmup.schedule.warmup_start_lr = no_warmup.schedule.base_lr;
    cells.push_back({"balanced_warmup", balanced_warmup});
    cells.push_back({"imbalanced_warmup", imbalanced});
    cells.push_back({"balanced_no_warmup", no_warmup});
  } else if (axis == "dropout") {
    for (double ratio : {0.0, 0.25, 0.5, 0.75}) {
      ExperimentConfig c = base;
      c.head.dropout_ratio = ratio;
      std::ostringstream label;
      label << "dropout_" << ratio;
      cells.push_back({label.str(), c});
    }
  } else if (axis == "bias") {
    ExperimentConfig with_bias = base;
    with_bias.bias = true;
    ExperimentConfig without_bias = base;
    without_bias.bias = false;
    cells.push_back({"with_bias", with_bias});
    cells.push_back({"without_bias", without_bias});
  } else {
    throw ConfigError(
        "axis must be one of structure, sampling, warmup, dropout, bias");
  }
  return cells;
}

std::string ablation_table(const std::string& axis,
                           const std::vector<AblationCell>& cells,
                           const std::vector<RetrievalReport>& reports,
                           const std::vector<bool>& ok) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  auto cell_text = [&](std::size_t i, double value) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(3);
    if (ok[i]) {
      v << value;
    } else {
      v << "failed";
    }
    return v.str();
  };

  if (axis == "structure") {
    out << "rank-1 by network structure and loss\n";
    out << std::left << std::setw(12) << "Network" << std::setw(10) << "Sphere"
        << std::setw(10) << "Softmx" << "\n";
    for (int v = 0; v < 4; ++v) {
      out << std::left << std::setw(12)
          << (std::string("network-") + static_cast<char>('A' + v));
      out << std::setw(10) << cell_text(2 * v, reports[2 * v].rank_k(1));
      out << std::setw(10) << cell_text(2 * v + 1, reports[2 * v + 1].rank_k(1));
      out << "\n";
    }
    return out.str();
  }

  const char* row_names_sampling[] = {"balanced, w/ warming-up",
                                      "imbalanced, w/ warming-up",
                                      "balanced, w/o warming-up"};
  const char* row_names_bias[] = {"w/ bias", "w/o bias"};
  out << std::left << std::setw(28) << (axis == "dropout" ? "ratio" : "")
      << std::setw(10) << "rank-1" << std::setw(10) << "mAP" << "\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string row = cells[i].label;
    if (axis == "sampling" || axis == "warmup") row = row_names_sampling[i];
    if (axis == "bias") row = row_names_bias[i];
    if (axis == "dropout") {
      std::ostringstream r;
      r << cells[i].config.head.dropout_ratio;
      row = r.str();
    }
    out << std::left << std::setw(28) << row << std::setw(10)
        << cell_text(i, reports[i].rank_k(1)) << std::setw(10)
        << cell_text(i, reports[i].mean_ap) << "\n";
  }
  return out.str();
}

int cmd_ablate(const CommonOpts& opts, const std::string& axis) {
  ResolvedConfig resolved;
  std::vector<AblationCell> cells;
  try {
    resolved = load_config(opts);
    cells = ablation_cells(axis, resolved.experiment);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  FeatureDataset data;
  try {
    data = load_dataset(opts, resolved);
  } catch (const Error& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitDatasetError;
  }

  fs::create_directories(opts.out_dir);
  std::vector<RetrievalReport> reports(cells.size());
  std::vector<bool> ok(cells.size(), false);
  int failures = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    try {
      reports[i] = run_and_write(cells[i].config, data,
                                 fs::path(opts.out_dir) / cells[i].label,
                                 false);
      ok[i] = true;
    } catch (const Error& e) {
      std::cerr << "cell " << cells[i].label << " failed: " << e.what()
                << "\n";
      ++failures;
    }
  }

  std::ostringstream csv;
  csv << std::fixed << std::setprecision(6);
  csv << "cell,rank1,rank5,rank10,mAP,valid_queries,status\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    csv << cells[i].label << ",";
    if (ok[i]) {
      csv << reports[i].rank_k(1) << "," << reports[i].rank_k(5) << ","
          << reports[i].rank_k(10) << "," << reports[i].mean_ap << ","
          << reports[i].num_valid_queries << ",ok\n";
    } else {
      csv << ",,,,,failed\n";
    }
  }
  write_text(fs::path(opts.out_dir) / "ablation.csv", csv.str());

  const std::string table = ablation_table(axis, cells, reports, ok);
  write_text(fs::path(opts.out_dir) / "ablation.txt", table);
  std::cout << table;
  if (failures > 0) {
    std::cerr << failures << " of " << cells.size() << " cells failed\n";
    return kExitDivergence;
  }
  return kExitOk;
}

int cmd_gen_synthetic(const CommonOpts& opts, const std::string& out_file) {
  ResolvedConfig resolved;
  try {
    ConfigFile file;
    if (!opts.config_path.empty()) file = parse_config_file(opts.config_path);
    resolved = resolve_config(file, true);
    if (opts.seed) {
      resolved.synthetic.seed = static_cast<std::uint64_t>(*opts.seed);
    }
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    const FeatureDataset data = generate_synthetic(resolved.synthetic);
    if (fs::path(out_file).has_parent_path()) {
      fs::create_directories(fs::path(out_file).parent_path());
    }
    write_feature_csv(out_file, data);
    std::cout << "wrote " << data.num_samples() << " samples ("
              << data.dim() << " dims) to " << out_file << "\n";
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitDatasetError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"hypersphere metric-learning experiment runner"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "train a model and evaluate");
  train->add_option("--config", train_opts.config_path, "config file");
  auto* train_data =
      train->add_option("--dataset", train_opts.dataset_path, "dataset CSV");
  train->add_flag("--synthetic", train_opts.synthetic,
                  "generate the synthetic dataset instead of reading one");
  train->add_option("--out", train_opts.out_dir, "output directory")
      ->required();
  train->add_option("--seed", train_opts.seed, "override the config seed");
  train->add_option("--eval-every", train_opts.eval_every,
                    "evaluate every n epochs during training");
  train->add_flag("--no-camera-exclusion", train_opts.no_camera_exclusion,
                  "keep same-identity same-camera gallery entries");

  std::string eval_checkpoint, eval_dataset, eval_out, eval_metric = "cosine";
  bool eval_no_exclusion = false;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")
      ->required();
  eval_cmd->add_option("--dataset", eval_dataset, "dataset CSV")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_option("--metric", eval_metric, "cosine or euclidean");
  eval_cmd->add_flag("--no-camera-exclusion", eval_no_exclusion,
                     "keep same-identity same-camera gallery entries");

  CommonOpts ablate_opts;
  std::string axis;
  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation grid");
  ablate->add_option("--config", ablate_opts.config_path, "config file");
  auto* ablate_data =
      ablate->add_option("--dataset", ablate_opts.dataset_path, "dataset CSV");
  ablate->add_flag("--synthetic", ablate_opts.synthetic,
                   "generate the synthetic dataset instead of reading one");
  ablate->add_option("--axis", axis,
                     "structure | sampling | warmup | dropout | bias")
      ->required();
  ablate->add_option("--out", ablate_opts.out_dir, "output directory")
      ->required();
  ablate->add_option("--seed", ablate_opts.seed, "override the config seed");

  CommonOpts gen_opts;
  std::string gen_out;
  CLI::App* gen =
      app.add_subcommand("gen-synthetic", "write a synthetic dataset CSV");
  gen->add_option("--config", gen_opts.config_path, "config file");
  gen->add_option("--out", gen_out, "output CSV path")->required();
  gen->add_option("--seed", gen_opts.seed, "override the synthetic seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (train->parsed()) {
    if (train_opts.synthetic == !train_data->empty()) {
      std::cerr << "config error: pass exactly one of --dataset or "
                   "--synthetic\n";
      return kExitConfigError;
    }
    return cmd_train(train_opts);
  }
  if (eval_cmd->parsed()) {
    if (eval_metric != "cosine" && eval_metric != "euclidean") {
      std::cerr << "config error: --metric must be cosine or euclidean\n";
      return kExitConfigError;
    }
    return cmd_eval(eval_checkpoint, eval_dataset, eval_out, eval_no_exclusion,
                    eval_metric);
  }
  if (ablate->parsed()) {
    if (ablate_opts.synthetic == !ablate_data->empty()) {
      std::cerr << "config error: pass exactly one of --dataset or "
                   "--synthetic\n";
      return kExitConfigError;
    }
    return cmd_ablate(ablate_opts, axis);
  }
  if (gen->parsed()) {
    return cmd_gen_synthetic(gen_opts, gen_out);
  }
  return kExitConfigError;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc) - 1);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace sphereml::cli
