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

// Hard-validator scoring and per-(source, instruction) winner selection.

#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "editmine/dataset_store.hpp"
#include "editmine/gateway.hpp"
#include "editmine/scheduler.hpp"

namespace editmine {

struct ScoredCandidate {
  Candidate candidate;
  ScorePair hard_scores;
};

struct GroupKey {
  std::string source_image_id;
  std::string bundle_id;
  std::size_t edit_index = 0;

  auto operator<=>(const GroupKey&) const = default;
};

struct CandidateGroup {
  GroupKey key;
  std::vector<ScoredCandidate> candidates;
};

struct HardScoreStats {
  std::uint64_t scored = 0;
  std::uint64_t score_unavailable = 0;
  std::uint64_t failed = 0;  // other gateway errors
  double cost_gpu_hours = 0;
};

/// Scores every candidate with the hard validator. Candidates whose score is
/// unavailable (or whose request fails) are dropped and counted. Output keeps
/// pool order.
std::vector<ScoredCandidate> hard_score_pool(const std::vector<Candidate>& pool, ModelGateway& gateway,
                                             HardScoreStats& stats, int max_parallel = 1);

/// Groups by (source, bundle, edit index) in order of first appearance.
std::vector<CandidateGroup> group_candidates(const std::vector<ScoredCandidate>& scored);

/// Keeps exactly the candidates with aesthetic >= t_aes and adherence >= t_adh.
CandidateGroup filter_thresholds(const CandidateGroup& group, double t_aes, double t_adh);

/// sqrt(aesthetic * adherence), evaluated in log space.
double geometric_mean(const ScorePair& s);

/// Score products closer than this compare as equal.
inline constexpr double kProductTieEpsilon = 1e-9;

/// True when a ranks strictly ahead of b: larger score product, then lower
/// edit seed, then lower edited image id.
bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b);

std::optional<ScoredCandidate> select_best(const CandidateGroup& group);

/// Record id of the Forward record for a group key.
std::string forward_record_id(const GroupKey& key);

/// One Forward record per group that has a winner, in group order. Groups are
/// expected to be threshold-filtered already.
Dataset build_dataset(const std::vector<CandidateGroup>& groups);

}  // namespace editmine
