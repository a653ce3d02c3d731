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

#ifndef SPHEREML_DATASET_HPP_
#define SPHEREML_DATASET_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sphereml/sampler.hpp"

namespace sphereml {

enum class Split { kTrain, kQuery, kGallery };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

/// A feature-vector dataset: one sample per row, with identity, camera
/// and split labels.
struct FeatureDataset {
  std::vector<std::string> sample_ids;
  Eigen::MatrixXd features;
  std::vector<int> identities;
  std::vector<int> cameras;
  std::vector<Split> splits;

  int num_samples() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }

  std::vector<int> rows_of(Split split) const;
  /// Identity -> train-row indices.
  IdentityIndex train_index() const;
};

/// Reads the CSV schema
///   sample_id,identity,camera,split,f0,...,f{d-1}
/// with exact decimal-to-double parsing and preserved row order.
/// Throws ParseError (with line number) on malformed rows and SchemaError
/// on a bad header.
FeatureDataset parse_feature_csv(const std::string& path);

/// Writes the same schema; 17 significant digits so values round-trip.
void write_feature_csv(const std::string& path, const FeatureDataset& data);

}  // namespace sphereml

#endif  // SPHEREML_DATASET_HPP_
