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

#include "sphereml/dataset.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace sphereml {

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kQuery: return "query";
    case Split::kGallery: return "gallery";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "query") return Split::kQuery;
  if (name == "gallery") return Split::kGallery;
  throw ParseError("unknown split '" + name + "'");
}

std::vector<int> FeatureDataset::rows_of(Split split) const {
  std::vector<int> rows;
  for (int i = 0; i < num_samples(); ++i) {
    if (splits[i] == split) rows.push_back(i);
  }
  return rows;
}

IdentityIndex FeatureDataset::train_index() const {
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < num_samples(); ++i) {
    if (splits[i] == Split::kTrain) groups[identities[i]].push_back(i);
  }
  return IdentityIndex(std::move(groups));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ls(line);
  while (std::getline(ls, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

int parse_int(const std::string& text, int line_no, const char* what) {
  std::size_t pos = 0;
  int value = 0;
  try {
    value = std::stoi(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || text.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what +
                     " '" + text + "'");
  }
  return value;
}

double parse_double(const std::string& text, int line_no) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end != begin + text.size() || text.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad number '" +
                     text + "'");
  }
  return value;
}

}  // namespace

FeatureDataset parse_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty dataset file: " + path);
  const std::vector<std::string> header = split_csv_line(line);
  const char* expected[] = {"sample_id", "identity", "camera", "split"};
  if (header.size() < 5) {
    throw SchemaError("header must be sample_id,identity,camera,split,f0,...");
  }
  for (int i = 0; i < 4; ++i) {
    if (header[i] != expected[i]) {
      throw SchemaError("header column " + std::to_string(i) + " must be '" +
                        expected[i] + "', found '" + header[i] + "'");
    }
  }
  const int dim = static_cast<int>(header.size()) - 4;
  for (int j = 0; j < dim; ++j) {
    const std::string want = "f" + std::to_string(j);
    if (header[4 + j] != want) {
      throw SchemaError("feature column " + std::to_string(4 + j) +
                        " must be '" + want + "', found '" + header[4 + j] +
                        "'");
    }
  }

  FeatureDataset data;
  std::vector<Eigen::VectorXd> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != 4 + dim) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(4 + dim) + " fields, found " +
                       std::to_string(fields.size()));
    }
    data.sample_ids.push_back(fields[0]);
    data.identities.push_back(parse_int(fields[1], line_no, "identity"));
    data.cameras.push_back(parse_int(fields[2], line_no, "camera"));
    data.splits.push_back(split_from_name(fields[3]));
    Eigen::VectorXd row(dim);
    for (int j = 0; j < dim; ++j) {
      row(j) = parse_double(fields[4 + j], line_no);
    }
    rows.push_back(std::move(row));
  }

  data.features.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.features.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return data;
}

void write_feature_csv(const std::string& path, const FeatureDataset& data) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open dataset file for writing: " + path);
  out << std::setprecision(17);
  out << "sample_id,identity,camera,split";
  for (int j = 0; j < data.dim(); ++j) out << ",f" << j;
  out << "\n";
  for (int i = 0; i < data.num_samples(); ++i) {
    out << data.sample_ids[i] << "," << data.identities[i] << ","
        << data.cameras[i] << "," << split_name(data.splits[i]);
    for (int j = 0; j < data.dim(); ++j) out << "," << data.features(i, j);
    out << "\n";
  }
  if (!out) throw ParseError("failed writing dataset: " + path);
}

}  // namespace sphereml
