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

#include "editmine/diff_gate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "editmine/common.hpp"

namespace editmine {

void validate(const DiffGateConfig& cfg) {
  if (cfg.pixel_threshold < 0 || cfg.pixel_threshold > 255) {
    throw ValidationError("pixel_threshold must be in [0, 255]");
  }
  if (!(cfg.min_component_fraction > 0.0 && cfg.min_component_fraction < 1.0)) {
    throw ValidationError("min_component_fraction must be in (0, 1)");
  }
}

std::uint64_t Mask::count() const {
  return static_cast<std::uint64_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

namespace {

int luma(const std::uint8_t* p) {
  return static_cast<int>(std::lround(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]));
}

// Union-find over provisional labels, with path halving.
class DisjointSets {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void join(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Keep the smaller label as root so the final numbering follows raster order.
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

Mask change_mask(const Image& a, const Image& b, int threshold, ChannelReduction reduction) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionMismatch("change_mask: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                            std::to_string(b.width) + "x" + std::to_string(b.height));
  }
  Mask m(a.width, a.height);
  const std::size_t n = a.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto* pa = &a.rgb[i * 3];
    const auto* pb = &b.rgb[i * 3];
    int delta;
    if (reduction == ChannelReduction::MaxAbs) {
      delta = std::max({std::abs(pa[0] - pb[0]), std::abs(pa[1] - pb[1]), std::abs(pa[2] - pb[2])});
    } else {
      delta = std::abs(luma(pa) - luma(pb));
    }
    m.bits[i] = delta > threshold ? 1 : 0;
  }
  return m;
}

ComponentStats label_components(const Mask& mask, std::vector<std::uint32_t>& labels, Connectivity) {
  const int w = mask.width, h = mask.height;
  labels.assign(static_cast<std::size_t>(w) * h, 0);
  DisjointSets sets;
  sets.make();  // label 0 is background

  // First pass: provisional labels from west and north neighbours.
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      if (!mask.bits[row + x]) continue;
      const std::uint32_t west = x > 0 ? labels[row + x - 1] : 0;
      const std::uint32_t north = y > 0 ? labels[row - w + x] : 0;
      if (west && north) {
        labels[row + x] = std::min(west, north);
        if (west != north) sets.join(west, north);
      } else if (west || north) {
        labels[row + x] = west ? west : north;
      } else {
        labels[row + x] = sets.make();
      }
    }
  }

  // Second pass: resolve to roots, renumber densely and accumulate sizes.
  std::vector<std::uint32_t> dense(sets.size(), 0);
  std::vector<std::uint64_t> sizes(1, 0);
  for (auto& l : labels) {
    if (!l) continue;
    const auto root = sets.find(l);
    if (!dense[root]) {
      dense[root] = static_cast<std::uint32_t>(sizes.size());
      sizes.push_back(0);
    }
    l = dense[root];
    ++sizes[l];
  }

  ComponentStats s;
  s.component_count = sizes.size() - 1;
  s.changed_pixel_count = std::accumulate(sizes.begin(), sizes.end(), std::uint64_t{0});
  s.largest_component_size = *std::max_element(sizes.begin(), sizes.end());
  s.largest_component_fraction = s.changed_pixel_count == 0 ? 0.0
                                     : static_cast<double>(s.largest_component_size) /
                                           static_cast<double>(s.changed_pixel_count);
  return s;
}

ComponentStats label_components(const Mask& mask, Connectivity connectivity) {
  std::vector<std::uint32_t> labels;
  return label_components(mask, labels, connectivity);
}

GateResult low_level_check(const Image& source, const Image& edited, const DiffGateConfig& cfg) {
  validate(cfg);
  const auto mask = change_mask(source, edited, cfg.pixel_threshold, cfg.reduction);
  GateResult r;
  r.stats = label_components(mask, cfg.connectivity);
  const bool silent = r.stats.changed_pixel_count == 0;
  const bool scattered = r.stats.largest_component_fraction < cfg.min_component_fraction;
  r.verdict = silent || scattered ? Verdict::Discard : Verdict::Pass;
  return r;
}

std::string to_string(Verdict v) { return v == Verdict::Pass ? "pass" : "discard"; }

}  // namespace editmine
