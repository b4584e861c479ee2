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

#include "editmine/selection.hpp"

#include <cmath>
#include <map>

namespace editmine {

std::vector<ScoredCandidate> hard_score_pool(const std::vector<Candidate>& pool, ModelGateway& gateway,
                                             HardScoreStats& stats, int max_parallel) {
  struct Slot {
    std::optional<ScorePair> scores;
    std::int64_t cost_nano = 0;
    bool unavailable = false;
  };
  std::vector<Slot> slots(pool.size());
  parallel_for(pool.size(), max_parallel, [&](std::size_t i) {
    const auto& c = pool[i];
    try {
      auto r = gateway.score(c.source, c.instruction, c.edited, Validator::Hard);
      slots[i].scores = r.value.scores;
      slots[i].cost_nano = to_nano_gpu_hours(r.cost_gpu_hours);
    } catch (const ScoreUnavailable& e) {
      slots[i].unavailable = true;
      slots[i].cost_nano = to_nano_gpu_hours(e.cost_gpu_hours);
    } catch (const GatewayError& e) {
      slots[i].cost_nano = to_nano_gpu_hours(e.cost_gpu_hours);
    }
  });

  std::vector<ScoredCandidate> out;
  std::int64_t cost = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    cost += slots[i].cost_nano;
    if (slots[i].scores) {
      ++stats.scored;
      out.push_back({pool[i], *slots[i].scores});
    } else if (slots[i].unavailable) {
      ++stats.score_unavailable;
    } else {
      ++stats.failed;
    }
  }
  stats.cost_gpu_hours += static_cast<double>(cost) / 1e9;
  return out;
}

std::vector<CandidateGroup> group_candidates(const std::vector<ScoredCandidate>& scored) {
  std::vector<CandidateGroup> groups;
  std::map<GroupKey, std::size_t> index;
  for (const auto& s : scored) {
    const auto& k = s.candidate.key;
    GroupKey gk{k.source_image_id, k.bundle_id, k.edit_index};
    auto [it, inserted] = index.emplace(gk, groups.size());
    if (inserted) groups.push_back({gk, {}});
    groups[it->second].candidates.push_back(s);
  }
  return groups;
}

CandidateGroup filter_thresholds(const CandidateGroup& group, double t_aes, double t_adh) {
  CandidateGroup out{group.key, {}};
  for (const auto& c : group.candidates) {
    if (c.hard_scores.aesthetic >= t_aes && c.hard_scores.adherence >= t_adh) out.candidates.push_back(c);
  }
  return out;
}

double geometric_mean(const ScorePair& s) {
  return std::exp(0.5 * (std::log(s.aesthetic) + std::log(s.adherence)));
}

bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
  // sqrt is monotone, so products decide the argmax. Scores arrive as short
  // decimals, so products closer than kProductTieEpsilon are the same value
  // (3.6 * 5.0 and 4.0 * 4.5 differ by one ulp in binary).
  const double pa = a.hard_scores.aesthetic * a.hard_scores.adherence;
  const double pb = b.hard_scores.aesthetic * b.hard_scores.adherence;
  if (std::abs(pa - pb) > kProductTieEpsilon) return pa > pb;
  if (a.candidate.edit_seed != b.candidate.edit_seed) return a.candidate.edit_seed < b.candidate.edit_seed;
  return a.candidate.edited.image_id < b.candidate.edited.image_id;
}

std::optional<ScoredCandidate> select_best(const CandidateGroup& group) {
  if (group.candidates.empty()) return std::nullopt;
  const ScoredCandidate* best = &group.candidates.front();
  for (const auto& c : group.candidates) {
    if (ranks_before(c, *best)) best = &c;
  }
  return *best;
}

std::string forward_record_id(const GroupKey& key) {
  return sha256_hex(key_of({"fwd", key.source_image_id, key.bundle_id, std::to_string(key.edit_index)}));
}

Dataset build_dataset(const std::vector<CandidateGroup>& groups) {
  Dataset ds;
  for (const auto& g : groups) {
    auto winner = select_best(g);
    if (!winner) continue;
    const auto& c = winner->candidate;
    TripletRecord r;
    r.record_id = forward_record_id(g.key);
    r.source_image = c.source;
    r.instruction = c.instruction;
    r.edited_image = c.edited;
    r.hard_scores = winner->hard_scores;
    r.derivation = {DerivationKind::Forward, {}};
    r.bundle_id = c.key.bundle_id;
    r.edit_index = c.key.edit_index;
    r.t2i_seed = c.t2i_seed;
    r.edit_seed = c.edit_seed;
    r.category_tag = c.category;
    r.t2i_prompt = c.t2i_prompt;
    ds.push_back(std::move(r));
  }
  return ds;
}

}  // namespace editmine
