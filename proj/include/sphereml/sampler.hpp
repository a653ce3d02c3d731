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

#ifndef SPHEREML_SAMPLER_HPP_
#define SPHEREML_SAMPLER_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sphereml/errors.hpp"

// Balanced PK batch construction: every mini-batch holds P identities
// times K instances; identities are drawn without replacement across an
// epoch, and per-identity instances repeat only when an identity owns
// fewer than K samples.

namespace sphereml {

/// Maps each identity to its sample indices (rows of a feature table).
class IdentityIndex {
 public:
  IdentityIndex() = default;
  explicit IdentityIndex(std::map<int, std::vector<int>> groups);

  const std::map<int, std::vector<int>>& groups() const { return groups_; }
  int num_identities() const { return static_cast<int>(groups_.size()); }
  int total_samples() const { return total_samples_; }
  const std::vector<int>& samples_of(int identity) const;

 private:
  std::map<int, std::vector<int>> groups_;
  int total_samples_ = 0;
};

struct SamplerConfig {
  int num_identities_per_batch = 16;  // P
  int instances_per_identity = 4;     // K
  std::uint64_t seed = 0;
};

/// One mini-batch: parallel arrays of sample indices and identity labels.
struct Batch {
  std::vector<int> sample_indices;
  std::vector<int> identities;
};

struct EpochPlan {
  std::vector<Batch> batches;
};

/// Builds the balanced plan for one epoch. Identities are shuffled with a
/// generator seeded by (seed XOR epoch_number), partitioned into groups of
/// P (an incomplete final group is dropped), and each selected identity
/// contributes K slots: a K-subset without replacement when it owns at
/// least K samples, otherwise its full inventory plus uniform redraws.
/// Throws ConfigError when P exceeds the identity count.
EpochPlan build_epoch(const IdentityIndex& index, const SamplerConfig& config,
                      int epoch_number);

struct IdentityAudit {
  int identity = 0;
  int inventory = 0;     // samples owned
  int appearances = 0;   // slots filled this epoch
  bool replacement_used = false;
};

struct AuditReport {
  std::vector<IdentityAudit> per_identity;
  std::vector<std::string> violations;
  bool passed() const { return violations.empty(); }
  /// Flat text table (identity, count, appearances, replacement_used).
  std::string to_text() const;
};

/// Verifies every EpochPlan invariant: batch shape P x K, identity
/// uniqueness across batches, the replacement rule, and exactly K
/// appearances per included identity. Violations are reported, not thrown.
AuditReport audit_epoch(const EpochPlan& plan, const IdentityIndex& index,
                        const SamplerConfig& config);

/// The unbalanced baseline: every slot is an independent uniform draw over
/// all samples, ceil(total / batch_size) batches per epoch.
EpochPlan imbalanced_epoch(const IdentityIndex& index, int batch_size,
                           std::uint64_t seed, int epoch_number);

/// Per-identity slot counts of an arbitrary plan (exposure census).
std::map<int, int> exposure_census(const EpochPlan& plan);

}  // namespace sphereml

#endif  // SPHEREML_SAMPLER_HPP_
