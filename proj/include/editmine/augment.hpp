/*
 * Copyright 2026 The editmine Authors.
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

// Dataset expansion: inverted triplets, composed triplets between edits of
// the same source, and the backward consistency filter over inversions.

#pragma once

#include <cstdint>
#include <string>

#include "editmine/dataset_store.hpp"
#include "editmine/gateway.hpp"
#include "json.hpp"

namespace editmine {

struct AugmentConfig {
  /// Ordered pairs sampled per source. 0 means every ordered pair.
  int max_compositions_per_source = 1;
  /// Merge the two composed sentences into one through the inverter endpoint.
  bool rewrite_composites = false;
  std::uint64_t seed = 0;
  double t_inv_aes = 4.7;
  double t_inv_adh = 4.7;
  int max_parallel = 1;
};

/// Throws ValidationError on a negative cap, thresholds outside [1, 5] or
/// max_parallel < 1.
void validate(const AugmentConfig& cfg);

struct AugmentStats {
  std::uint64_t inverted = 0;
  std::uint64_t inversion_refused = 0;
  std::uint64_t inversion_failed = 0;
  std::uint64_t composed = 0;
  std::uint64_t rewrite_failed = 0;
  std::uint64_t backward_scored = 0;
  std::uint64_t backward_rejected = 0;
  std::uint64_t backward_unavailable = 0;
  std::uint64_t removed_records = 0;
  double cost_gpu_hours = 0;
};

nlohmann::json augment_stats_json(const AugmentStats& s);

std::string inverted_record_id(const std::string& parent_id);
std::string composed_record_id(const std::string& first_parent, const std::string& second_parent);

/// One Inverted record per Forward record that does not already have one,
/// with source and edited images swapped. Refusals and protocol violations are
/// skipped and counted. Returns only the new records.
Dataset apply_inversions(const Dataset& ds, ModelGateway& gateway, AugmentStats& stats, int max_parallel = 1);

/// Two sentences: the inverse of e1 followed by the forward text of e2.
std::string compose_instruction(const std::string& inverse_of_first, const std::string& forward_second);

/// Composed records for sources with two or more Forward records. A pair
/// (e1, e2) needs the inverse text of e1, taken from its Inverted record;
/// pairs without one are skipped. Returns only the new records. `gateway` is
/// used only when cfg.rewrite_composites is set.
Dataset apply_bootstraps(const Dataset& ds, const AugmentConfig& cfg, AugmentStats& stats,
                         ModelGateway* gateway = nullptr);

/// Scores every Inverted record that has no hard scores yet. A failing or
/// unscorable inversion removes itself, its Forward parent and every Composed
/// record that references either. Survivors keep their scores.
Dataset backward_consistency_filter(const Dataset& ds, ModelGateway& gateway, double t_inv_aes, double t_inv_adh,
                                    AugmentStats& stats, int max_parallel = 1);

/// Removes `ids` and cascades to every record whose parent was removed.
Dataset remove_with_descendants(const Dataset& ds, const std::vector<std::string>& ids);

/// Inversions, then compositions, then the backward filter.
Dataset augment_dataset(const Dataset& ds, ModelGateway& gateway, const AugmentConfig& cfg, AugmentStats& stats);

}  // namespace editmine
