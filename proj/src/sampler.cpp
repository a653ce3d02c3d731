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

#include "sphereml/sampler.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace sphereml {

IdentityIndex::IdentityIndex(std::map<int, std::vector<int>> groups)
    : groups_(std::move(groups)) {
  std::set<int> seen;
  for (const auto& [id, samples] : groups_) {
    if (samples.empty()) {
      throw InvalidConfig("identity " + std::to_string(id) +
                          " has no samples");
    }
    for (int s : samples) {
      if (!seen.insert(s).second) {
        throw InvalidConfig("sample index " + std::to_string(s) +
                            " appears under two identities");
      }
    }
    total_samples_ += static_cast<int>(samples.size());
  }
}

const std::vector<int>& IdentityIndex::samples_of(int identity) const {
  auto it = groups_.find(identity);
  if (it == groups_.end()) {
    throw InvalidConfig("unknown identity " + std::to_string(identity));
  }
  return it->second;
}

EpochPlan build_epoch(const IdentityIndex& index, const SamplerConfig& config,
                      int epoch_number) {
  const int num_ids = index.num_identities();
  const int p = config.num_identities_per_batch;
  const int k = config.instances_per_identity;
  if (p < 1 || k < 1) {
    throw ConfigError("sampler requires P >= 1 and K >= 1");
  }
  if (p > num_ids) {
    std::ostringstream msg;
    msg << "sampler requires P <= number of identities (P=" << p
        << ", identities=" << num_ids << ")";
    throw ConfigError(msg.str());
  }

  std::mt19937_64 rng(config.seed ^ static_cast<std::uint64_t>(epoch_number));

  std::vector<int> ids;
  ids.reserve(num_ids);
  for (const auto& [id, _] : index.groups()) ids.push_back(id);
  std::shuffle(ids.begin(), ids.end(), rng);

  EpochPlan plan;
  const int num_batches = num_ids / p;  // incomplete final group dropped
  plan.batches.reserve(num_batches);
  for (int b = 0; b < num_batches; ++b) {
    Batch batch;
    batch.sample_indices.reserve(p * k);
    batch.identities.reserve(p * k);
    for (int slot = 0; slot < p; ++slot) {
      const int id = ids[b * p + slot];
      const std::vector<int>& inventory = index.samples_of(id);
      std::vector<int> chosen;
      if (static_cast<int>(inventory.size()) >= k) {
        // K-subset without replacement
        std::vector<int> pool = inventory;
        std::shuffle(pool.begin(), pool.end(), rng);
        chosen.assign(pool.begin(), pool.begin() + k);
      } else {
        // full inventory once, remainder by uniform redraws
        chosen = inventory;
        std::uniform_int_distribution<std::size_t> pick(0,
                                                        inventory.size() - 1);
        while (static_cast<int>(chosen.size()) < k) {
          chosen.push_back(inventory[pick(rng)]);
        }
      }
      for (int s : chosen) {
        batch.sample_indices.push_back(s);
        batch.identities.push_back(id);
      }
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

AuditReport audit_epoch(const EpochPlan& plan, const IdentityIndex& index,
                        const SamplerConfig& config) {
  const int p = config.num_identities_per_batch;
  const int k = config.instances_per_identity;
  AuditReport report;
  auto flag = [&](const std::string& what) { report.violations.push_back(what); };

  std::map<int, int> appearances;
  std::map<int, bool> replacement;
  std::set<int> ids_seen_in_epoch;

  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    const Batch& batch = plan.batches[b];
    std::ostringstream where;
    where << "batch " << b;
    if (batch.sample_indices.size() != static_cast<std::size_t>(p * k) ||
        batch.identities.size() != batch.sample_indices.size()) {
      flag(where.str() + ": wrong shape, expected P*K = " +
           std::to_string(p * k) + " slots");
      continue;
    }

    // group the batch's slots by identity
    std::map<int, std::vector<int>> by_id;
    for (std::size_t i = 0; i < batch.sample_indices.size(); ++i) {
      by_id[batch.identities[i]].push_back(batch.sample_indices[i]);
    }
    if (static_cast<int>(by_id.size()) != p) {
      flag(where.str() + ": expected " + std::to_string(p) +
           " distinct identities, found " + std::to_string(by_id.size()));
    }
    for (const auto& [id, slots] : by_id) {
      if (!ids_seen_in_epoch.insert(id).second) {
        flag(where.str() + ": identity " + std::to_string(id) +
             " already appeared in an earlier batch of this epoch");
      }
      if (static_cast<int>(slots.size()) != k) {
        flag(where.str() + ": identity " + std::to_string(id) + " fills " +
             std::to_string(slots.size()) + " slots, expected " +
             std::to_string(k));
      }
      const std::vector<int>* inventory = nullptr;
      try {
        inventory = &index.samples_of(id);
      } catch (const InvalidConfig&) {
        flag(where.str() + ": identity " + std::to_string(id) +
             " is not in the index");
        continue;
      }
      std::set<int> inv(inventory->begin(), inventory->end());
      std::set<int> distinct;
      bool repeated = false;
      for (int s : slots) {
        if (!inv.count(s)) {
          flag(where.str() + ": sample " + std::to_string(s) +
               " does not belong to identity " + std::to_string(id));
        }
        if (!distinct.insert(s).second) repeated = true;
      }
      if (static_cast<int>(inventory->size()) >= k) {
        if (repeated) {
          flag(where.str() + ": identity " + std::to_string(id) +
               " repeats a sample although it owns >= K");
        }
      } else {
        if (static_cast<int>(distinct.size()) != static_cast<int>(inventory->size())) {
          flag(where.str() + ": identity " + std::to_string(id) +
               " does not cover its full inventory despite owning < K");
        }
        replacement[id] = true;
      }
      appearances[id] += static_cast<int>(slots.size());
    }
  }

  for (const auto& [id, inventory] : index.groups()) {
    auto it = appearances.find(id);
    if (it == appearances.end()) continue;  // dropped by the final group rule
    if (it->second != k) {
      flag("identity " + std::to_string(id) + " appears " +
           std::to_string(it->second) + " times this epoch, expected K=" +
           std::to_string(k));
    }
    IdentityAudit ia;
    ia.identity = id;
    ia.inventory = static_cast<int>(inventory.size());
    ia.appearances = it->second;
    ia.replacement_used = replacement.count(id) > 0;
    report.per_identity.push_back(ia);
  }
  return report;
}

std::string AuditReport::to_text() const {
  std::ostringstream out;
  out << "identity count appearances replacement_used\n";
  for (const IdentityAudit& ia : per_identity) {
    out << ia.identity << " " << ia.inventory << " " << ia.appearances << " "
        << (ia.replacement_used ? 1 : 0) << "\n";
  }
  out << "violations " << violations.size() << "\n";
  for (const std::string& v : violations) {
    out << "violation " << v << "\n";
  }
  return out.str();
}

EpochPlan imbalanced_epoch(const IdentityIndex& index, int batch_size,
                           std::uint64_t seed, int epoch_number) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  const int total = index.total_samples();

  // flat sample table with identity lookup
  std::vector<std::pair<int, int>> samples;  // (sample index, identity)
  samples.reserve(total);
  for (const auto& [id, idxs] : index.groups()) {
    for (int s : idxs) samples.emplace_back(s, id);
  }
  std::sort(samples.begin(), samples.end());

  std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(epoch_number));
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);

  const int num_batches = (total + batch_size - 1) / batch_size;
  EpochPlan plan;
  plan.batches.reserve(num_batches);
  for (int b = 0; b < num_batches; ++b) {
    Batch batch;
    batch.sample_indices.reserve(batch_size);
    batch.identities.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
      const auto& [s, id] = samples[pick(rng)];
      batch.sample_indices.push_back(s);
      batch.identities.push_back(id);
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

std::map<int, int> exposure_census(const EpochPlan& plan) {
  std::map<int, int> census;
  for (const Batch& batch : plan.batches) {
    for (int id : batch.identities) ++census[id];
  }
  return census;
}

}  // namespace sphereml
