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

// Slow, obviously-correct reference implementations used by the tests.
// None of these share code with the library.

#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct Components {
  std::uint64_t count = 0;
  std::uint64_t largest = 0;
  std::uint64_t total = 0;
};

// Breadth-first flood fill over a row-major 0/1 grid, 4-connected.
inline Components flood_fill(const std::vector<std::uint8_t>& grid, int w, int h) {
  Components c;
  std::vector<bool> seen(grid.size(), false);
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const auto start = static_cast<std::size_t>(y0) * w + x0;
      if (!grid[start] || seen[start]) continue;
      std::uint64_t size = 0;
      std::deque<std::pair<int, int>> q{{x0, y0}};
      seen[start] = true;
      while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        ++size;
        const int dx[] = {1, -1, 0, 0};
        const int dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k], ny = y + dy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const auto i = static_cast<std::size_t>(ny) * w + nx;
          if (grid[i] && !seen[i]) {
            seen[i] = true;
            q.emplace_back(nx, ny);
          }
        }
      }
      ++c.count;
      c.total += size;
      if (size > c.largest) c.largest = size;
    }
  }
  return c;
}

// Rank of each element: (number strictly smaller) + (number equal + 1) / 2.
inline std::vector<double> ranks_by_counting(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      if (x < v[i]) less += 1;
      if (x == v[i]) equal += 1;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

inline double rank_then_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks_by_counting(a), ranks_by_counting(b));
}

inline double direct_mae(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
  return s / static_cast<double>(a.size());
}

struct Table {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

// Contingency table by explicit enumeration of the four cases.
inline Table contingency(const std::vector<std::pair<double, double>>& pred,
                         const std::vector<std::pair<double, double>>& truth, double threshold, double baseline) {
  Table t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool p = true;
    if (pred[i].first < threshold) p = false;
    if (pred[i].second < threshold) p = false;
    bool g = true;
    if (!(truth[i].first > baseline)) g = false;
    if (!(truth[i].second > baseline)) g = false;
    if (p) {
      if (g) t.tp++; else t.fp++;
    } else {
      if (g) t.fn++; else t.tn++;
    }
  }
  return t;
}

// Rater bias by the textbook definition: for each rater, average over the
// triplets they rated of (their score - that triplet's mean score).
// scores[triplet][rater] = value.
inline std::map<std::string, double> rater_bias(
    const std::map<std::string, std::map<std::string, double>>& scores) {
  std::map<std::string, double> tmean;
  for (const auto& [t, by_rater] : scores) {
    double s = 0;
    for (const auto& [_, v] : by_rater) s += v;
    tmean[t] = s / static_cast<double>(by_rater.size());
  }
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& [t, by_rater] : scores) {
    for (const auto& [r, v] : by_rater) {
      acc[r].first += v - tmean[t];
      acc[r].second += 1;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [r, a] : acc) out[r] = a.first / a.second;
  return out;
}

}  // namespace oracle
