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

#include "editmine/augment.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "editmine/scheduler.hpp"

namespace editmine {

using nlohmann::json;

void validate(const AugmentConfig& cfg) {
  if (cfg.max_compositions_per_source < 0) throw ValidationError("max_compositions_per_source must be >= 0");
  for (double t : {cfg.t_inv_aes, cfg.t_inv_adh}) {
    if (!(t >= 1.0 && t <= 5.0)) throw ValidationError("inversion thresholds must be in [1, 5]");
  }
  if (cfg.max_parallel < 1) throw ValidationError("max_parallel must be >= 1");
}

json augment_stats_json(const AugmentStats& s) {
  return {{"inverted", s.inverted},
          {"inversion_refused", s.inversion_refused},
          {"inversion_failed", s.inversion_failed},
          {"composed", s.composed},
          {"rewrite_failed", s.rewrite_failed},
          {"backward_scored", s.backward_scored},
          {"backward_rejected", s.backward_rejected},
          {"backward_unavailable", s.backward_unavailable},
          {"removed_records", s.removed_records},
          {"cost_nano_gpu_hours", to_nano_gpu_hours(s.cost_gpu_hours)}};
}

std::string inverted_record_id(const std::string& parent_id) { return sha256_hex(key_of({"inv", parent_id})); }

std::string composed_record_id(const std::string& first_parent, const std::string& second_parent) {
  return sha256_hex(key_of({"cmp", first_parent, second_parent}));
}

Dataset apply_inversions(const Dataset& ds, ModelGateway& gateway, AugmentStats& stats, int max_parallel) {
  std::set<std::string> already;
  for (const auto& r : ds) {
    if (r.derivation.kind == DerivationKind::Inverted) already.insert(r.derivation.parent_ids.at(0));
  }
  std::vector<const TripletRecord*> todo;
  for (const auto& r : ds) {
    if (r.derivation.kind == DerivationKind::Forward && !already.count(r.record_id)) todo.push_back(&r);
  }

  enum class Status { Ok, Refused, Failed };
  struct Slot {
    Status status = Status::Failed;
    std::string text;
    std::int64_t cost_nano = 0;
  };
  std::vector<Slot> slots(todo.size());
  parallel_for(todo.size(), max_parallel, [&](std::size_t i) {
    const auto& parent = *todo[i];
    const auto& description = parent.t2i_prompt.empty() ? parent.instruction : parent.t2i_prompt;
    try {
      auto r = gateway.invert(description, parent.instruction);
      slots[i] = {Status::Ok, r.value, to_nano_gpu_hours(r.cost_gpu_hours)};
    } catch (const InversionRefused& e) {
      slots[i] = {Status::Refused, {}, to_nano_gpu_hours(e.cost_gpu_hours)};
    } catch (const GatewayError& e) {
      slots[i] = {Status::Failed, {}, to_nano_gpu_hours(e.cost_gpu_hours)};
    }
  });

  Dataset out;
  std::int64_t cost = 0;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    cost += slots[i].cost_nano;
    if (slots[i].status == Status::Refused) {
      ++stats.inversion_refused;
      continue;
    }
    if (slots[i].status == Status::Failed) {
      ++stats.inversion_failed;
      continue;
    }
    const auto& parent = *todo[i];
    TripletRecord r;
    r.record_id = inverted_record_id(parent.record_id);
    r.source_image = parent.edited_image;
    r.instruction = slots[i].text;
    r.edited_image = parent.source_image;
    r.derivation = {DerivationKind::Inverted, {parent.record_id}};
    r.bundle_id = parent.bundle_id;
    r.edit_index = parent.edit_index;
    r.category_tag = parent.category_tag;
    r.t2i_prompt = parent.t2i_prompt;
    out.push_back(std::move(r));
    ++stats.inverted;
  }
  stats.cost_gpu_hours += static_cast<double>(cost) / 1e9;
  return out;
}

std::string compose_instruction(const std::string& inverse_of_first, const std::string& forward_second) {
  auto first = trim(inverse_of_first);
  if (!first.empty() && first.back() != '.' && first.back() != '!' && first.back() != '?') first += '.';
  return first + " " + trim(forward_second);
}

Dataset apply_bootstraps(const Dataset& ds, const AugmentConfig& cfg, AugmentStats& stats, ModelGateway* gateway) {
  validate(cfg);
  if (cfg.rewrite_composites && !gateway) throw std::invalid_argument("rewrite_composites needs a gateway");

  std::map<std::string, const TripletRecord*> inverse_of;  // forward id -> its Inverted record
  std::set<std::string> existing;
  for (const auto& r : ds) {
    existing.insert(r.record_id);
    if (r.derivation.kind == DerivationKind::Inverted) inverse_of[r.derivation.parent_ids.at(0)] = &r;
  }

  // Forward records per source, in dataset order of first appearance.
  std::vector<std::string> source_order;
  std::map<std::string, std::vector<const TripletRecord*>> by_source;
  for (const auto& r : ds) {
    if (r.derivation.kind != DerivationKind::Forward) continue;
    auto& v = by_source[r.source_image.image_id];
    if (v.empty()) source_order.push_back(r.source_image.image_id);
    v.push_back(&r);
  }

  struct Pair {
    const TripletRecord* first;
    const TripletRecord* second;
    std::string inverse_text;
  };
  std::vector<Pair> chosen;
  for (const auto& src : source_order) {
    const auto& fwd = by_source[src];
    if (fwd.size() < 2) continue;
    std::vector<Pair> pairs;
    for (const auto* a : fwd) {
      auto inv = inverse_of.find(a->record_id);
      if (inv == inverse_of.end()) continue;
      for (const auto* b : fwd) {
        if (a == b) continue;
        if (existing.count(composed_record_id(a->record_id, b->record_id))) continue;
        pairs.push_back({a, b, inv->second->instruction});
      }
    }
    const auto cap = static_cast<std::size_t>(cfg.max_compositions_per_source);
    if (cap > 0 && pairs.size() > cap) {
      // Partial Fisher-Yates, then restore enumeration order.
      std::vector<std::size_t> idx(pairs.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      Rng rng(digest_u64(key_of({"compose", std::to_string(cfg.seed), src})));
      for (std::size_t i = 0; i < cap; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(rng, idx.size() - i));
        std::swap(idx[i], idx[j]);
      }
      idx.resize(cap);
      std::sort(idx.begin(), idx.end());
      for (auto i : idx) chosen.push_back(pairs[i]);
    } else {
      chosen.insert(chosen.end(), pairs.begin(), pairs.end());
    }
  }

  std::vector<std::string> texts(chosen.size());
  std::vector<std::int64_t> costs(chosen.size(), 0);
  std::vector<char> ok(chosen.size(), 1);
  parallel_for(chosen.size(), cfg.rewrite_composites ? cfg.max_parallel : 1, [&](std::size_t i) {
    texts[i] = compose_instruction(chosen[i].inverse_text, chosen[i].second->instruction);
    if (!cfg.rewrite_composites) return;
    try {
      auto r = gateway->rewrite_instruction(texts[i]);
      texts[i] = r.value;
      costs[i] = to_nano_gpu_hours(r.cost_gpu_hours);
    } catch (const GatewayError& e) {
      costs[i] = to_nano_gpu_hours(e.cost_gpu_hours);
      ok[i] = 0;
    }
  });

  Dataset out;
  std::int64_t cost = 0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    cost += costs[i];
    if (!ok[i]) {
      ++stats.rewrite_failed;
      continue;
    }
    const auto& a = *chosen[i].first;
    const auto& b = *chosen[i].second;
    TripletRecord r;
    r.record_id = composed_record_id(a.record_id, b.record_id);
    r.source_image = a.edited_image;
    r.instruction = texts[i];
    r.edited_image = b.edited_image;
    r.derivation = {DerivationKind::Composed, {a.record_id, b.record_id}};
    r.bundle_id = b.bundle_id;
    r.edit_index = b.edit_index;
    r.category_tag = b.category_tag;
    r.t2i_prompt = b.t2i_prompt;
    out.push_back(std::move(r));
    ++stats.composed;
  }
  stats.cost_gpu_hours += static_cast<double>(cost) / 1e9;
  return out;
}

Dataset remove_with_descendants(const Dataset& ds, const std::vector<std::string>& ids) {
  std::set<std::string> removed(ids.begin(), ids.end());
  // Parents may appear after children in a manifest, so iterate to a fixpoint.
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& r : ds) {
      if (removed.count(r.record_id)) continue;
      for (const auto& p : r.derivation.parent_ids) {
        if (removed.count(p)) {
          removed.insert(r.record_id);
          changed = true;
          break;
        }
      }
    }
  }
  Dataset out;
  for (const auto& r : ds) {
    if (!removed.count(r.record_id)) out.push_back(r);
  }
  return out;
}

Dataset backward_consistency_filter(const Dataset& ds, ModelGateway& gateway, double t_inv_aes, double t_inv_adh,
                                    AugmentStats& stats, int max_parallel) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds[i].derivation.kind == DerivationKind::Inverted && !ds[i].hard_scores) todo.push_back(i);
  }

  struct Slot {
    std::optional<ScorePair> scores;
    bool unavailable = false;
    std::int64_t cost_nano = 0;
  };
  std::vector<Slot> slots(todo.size());
  parallel_for(todo.size(), max_parallel, [&](std::size_t k) {
    const auto& r = ds[todo[k]];
    try {
      auto s = gateway.score(r.source_image, r.instruction, r.edited_image, Validator::Hard);
      slots[k].scores = s.value.scores;
      slots[k].cost_nano = to_nano_gpu_hours(s.cost_gpu_hours);
    } catch (const GatewayError& e) {
      slots[k].unavailable = true;
      slots[k].cost_nano = to_nano_gpu_hours(e.cost_gpu_hours);
    }
  });

  Dataset scored = ds;
  std::vector<std::string> to_remove;
  std::int64_t cost = 0;
  for (std::size_t k = 0; k < todo.size(); ++k) {
    auto& r = scored[todo[k]];
    cost += slots[k].cost_nano;
    bool fail = false;
    if (!slots[k].scores) {
      ++stats.backward_unavailable;
      fail = true;
    } else {
      ++stats.backward_scored;
      r.hard_scores = slots[k].scores;
      if (r.hard_scores->aesthetic < t_inv_aes || r.hard_scores->adherence < t_inv_adh) {
        ++stats.backward_rejected;
        fail = true;
      }
    }
    if (fail) {
      to_remove.push_back(r.record_id);
      to_remove.push_back(r.derivation.parent_ids.at(0));
    }
  }
  stats.cost_gpu_hours += static_cast<double>(cost) / 1e9;
  auto out = remove_with_descendants(scored, to_remove);
  stats.removed_records += scored.size() - out.size();
  return out;
}

Dataset augment_dataset(const Dataset& ds, ModelGateway& gateway, const AugmentConfig& cfg, AugmentStats& stats) {
  validate(cfg);
  Dataset out = ds;
  auto inverted = apply_inversions(out, gateway, stats, cfg.max_parallel);
  out.insert(out.end(), inverted.begin(), inverted.end());
  auto composed = apply_bootstraps(out, cfg, stats, &gateway);
  out.insert(out.end(), composed.begin(), composed.end());
  return backward_consistency_filter(out, gateway, cfg.t_inv_aes, cfg.t_inv_adh, stats, cfg.max_parallel);
}

}  // namespace editmine
