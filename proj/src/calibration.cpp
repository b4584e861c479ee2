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

#include "editmine/calibration.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

#include "editmine/common.hpp"

namespace editmine {

std::string to_string(Axis a) { return a == Axis::Instruction ? "instruction" : "aesthetics"; }

Axis axis_from_string(const std::string& s) {
  const auto l = to_lower(s);
  if (l == "instruction" || l == "adherence") return Axis::Instruction;
  if (l == "aesthetics" || l == "aesthetic") return Axis::Aesthetics;
  throw ValidationError("unknown axis '" + s + "'");
}

void validate_scores(const std::vector<RaterScore>& scores) {
  std::set<std::tuple<std::string, std::string, Axis>> seen;
  for (const auto& s : scores) {
    if (s.triplet_id.empty() || s.rater_id.empty()) throw ValidationError("rater score with an empty id");
    if (!(s.value >= 1.0 && s.value <= 5.0)) {
      throw ValidationError(fmt::format("score {} by {} on {} is outside [1, 5]", s.value, s.rater_id, s.triplet_id));
    }
    if (!seen.emplace(s.triplet_id, s.rater_id, s.axis).second) {
      throw ValidationError("duplicate score by " + s.rater_id + " on " + s.triplet_id + " (" + to_string(s.axis) +
                            ")");
    }
  }
}

namespace {

std::map<std::string, double> triplet_means(const std::vector<RaterScore>& scores, Axis axis) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& s : scores) {
    if (s.axis != axis) continue;
    auto& a = acc[s.triplet_id];
    a.first += s.value;
    ++a.second;
  }
  std::map<std::string, double> out;
  for (const auto& [id, a] : acc) out[id] = a.first / a.second;
  return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

std::vector<RaterBias> rater_bias(const std::vector<RaterScore>& scores, Axis axis) {
  const auto means = triplet_means(scores, axis);
  std::map<std::string, std::pair<double, double>> sums;  // (raw sum, triplet-mean sum)
  std::map<std::string, int> counts;
  for (const auto& s : scores) {
    if (s.axis != axis) continue;
    auto& a = sums[s.rater_id];
    a.first += s.value;
    a.second += means.at(s.triplet_id);
    ++counts[s.rater_id];
  }
  std::vector<RaterBias> out;
  for (const auto& [rater, a] : sums) {
    const double n = counts[rater];
    out.push_back({rater, axis, a.first / n - a.second / n});
  }
  return out;
}

std::vector<TripletConsensus> consensus(const std::vector<RaterScore>& scores, const std::vector<RaterBias>& biases,
                                        Axis axis) {
  std::map<std::string, double> bias;
  for (const auto& b : biases) {
    if (b.axis == axis) bias[b.rater_id] = b.bias;
  }
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& s : scores) {
    if (s.axis != axis) continue;
    auto it = bias.find(s.rater_id);
    auto& a = acc[s.triplet_id];
    a.first += s.value - (it == bias.end() ? 0.0 : it->second);
    ++a.second;
  }
  std::vector<TripletConsensus> out;
  for (const auto& [id, a] : acc) out.push_back({id, axis, a.first / a.second});
  return out;
}

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty()) throw std::invalid_argument("mae: vectors must be equal, non-empty");
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("spearman: size mismatch");
  if (pred.size() < 2) throw std::invalid_argument("spearman: need at least two elements");
  const auto a = average_ranks(pred);
  const auto b = average_ranks(truth);
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

Reliability inter_rater_reliability(const std::vector<RaterScore>& scores, Axis axis) {
  std::map<std::string, std::map<std::string, double>> by_rater;
  for (const auto& s : scores) {
    if (s.axis == axis) by_rater[s.rater_id][s.triplet_id] = s.value;
  }
  std::vector<double> rhos;
  for (auto a = by_rater.begin(); a != by_rater.end(); ++a) {
    for (auto b = std::next(a); b != by_rater.end(); ++b) {
      std::vector<double> x, y;
      for (const auto& [tid, v] : a->second) {
        auto it = b->second.find(tid);
        if (it == b->second.end()) continue;
        x.push_back(v);
        y.push_back(it->second);
      }
      if (x.size() < 2) continue;
      const double rho = spearman(x, y);
      if (!std::isnan(rho)) rhos.push_back(rho);
    }
  }
  Reliability r;
  r.pairs = rhos.size();
  if (rhos.empty()) {
    r.mean = r.stddev = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.mean = mean_of(rhos);
  double ss = 0;
  for (double v : rhos) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(rhos.size()));
  return r;
}

std::vector<double> default_bucket_edges() { return {1.0, 2.0, 3.0, 4.0, 4.5, 4.7, 5.0}; }

std::optional<std::size_t> bucket_index(double v, const std::vector<double>& edges) {
  if (edges.size() < 2 || !(v >= edges.front() && v <= edges.back())) return std::nullopt;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (v < edges[i + 1]) return i;
  }
  return edges.size() - 2;
}

std::string bucket_label(std::size_t i, const std::vector<double>& edges) {
  const bool last = i + 2 == edges.size();
  return fmt::format("[{:g}, {:g}{}", edges[i], edges[i + 1], last ? "]" : ")");
}

std::vector<BucketError> bucketed_mae(const std::vector<double>& pred, const std::vector<double>& truth,
                                      const std::vector<double>& edges) {
  if (pred.size() != truth.size()) throw std::invalid_argument("bucketed_mae: size mismatch");
  const std::size_t nb = edges.size() < 2 ? 0 : edges.size() - 1;
  std::vector<double> sums(nb, 0.0);
  std::vector<BucketError> out(nb);
  for (std::size_t i = 0; i < nb; ++i) out[i].label = bucket_label(i, edges);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto b = bucket_index(truth[i], edges);
    if (!b) continue;
    sums[*b] += std::abs(pred[i] - truth[i]);
    ++out[*b].count;
  }
  for (std::size_t i = 0; i < nb; ++i) {
    out[i].mae = out[i].count ? sums[i] / static_cast<double>(out[i].count) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<double>& pred,
                                                        const std::vector<double>& truth,
                                                        const std::vector<double>& edges) {
  if (pred.size() != truth.size()) throw std::invalid_argument("confusion_matrix: size mismatch");
  const std::size_t nb = edges.size() < 2 ? 0 : edges.size() - 1;
  std::vector<std::vector<std::int64_t>> m(nb, std::vector<std::int64_t>(nb, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto t = bucket_index(truth[i], edges);
    auto p = bucket_index(pred[i], edges);
    if (t && p) ++m[*t][*p];
  }
  return m;
}

ClassificationMetrics classification_metrics(const std::vector<AxisPair>& pred, const std::vector<AxisPair>& truth,
                                             double operating_threshold, double positive_baseline) {
  if (pred.size() != truth.size()) throw std::invalid_argument("classification_metrics: size mismatch");
  ClassificationMetrics m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i].adherence >= operating_threshold && pred[i].aesthetic >= operating_threshold;
    const bool t = truth[i].adherence > positive_baseline && truth[i].aesthetic > positive_baseline;
    if (p && t) ++m.tp;
    if (p && !t) ++m.fp;
    if (!p && t) ++m.fn;
    if (!p && !t) ++m.tn;
  }
  const auto ratio = [](std::int64_t a, std::int64_t b) { return static_cast<double>(a) / static_cast<double>(b); };
  m.precision_undefined = m.tp + m.fp == 0;
  m.recall_undefined = m.tp + m.fn == 0;
  m.precision = m.precision_undefined ? 0.0 : ratio(m.tp, m.tp + m.fp);
  m.recall = m.recall_undefined ? 0.0 : ratio(m.tp, m.tp + m.fn);
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = pred.empty() ? 0.0 : ratio(m.tp + m.tn, static_cast<std::int64_t>(pred.size()));
  return m;
}

std::vector<SweepPoint> pr_sweep(const std::vector<AxisPair>& pred, const std::vector<AxisPair>& truth,
                                 const std::vector<double>& thresholds, double positive_baseline) {
  std::vector<SweepPoint> out;
  for (double t : thresholds) {
    const auto m = classification_metrics(pred, truth, t, positive_baseline);
    out.push_back({t, m.precision, m.recall, m.precision_undefined});
  }
  return out;
}

}  // namespace editmine
