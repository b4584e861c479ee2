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

// Low-level edit check.
//
// The absolute difference of two equally sized images is thresholded into a
// change mask, the mask is labelled into 4-connected components, and the edit
// is discarded when the largest component is too small a share of all changed
// pixels (scattered noise) or when nothing changed at all (silent no-op).
//
// Labelling is the classic two-pass raster scan: provisional 32-bit labels
// from the west and north neighbours, equivalences merged in a union-find
// forest, then a second pass accumulates component sizes by root.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "editmine/image.hpp"

namespace editmine {

enum class Connectivity { Four };

/// How per-channel deltas collapse to one value before thresholding.
enum class ChannelReduction {
  MaxAbs,  // max over RGB of |a - b|
  Luma,    // |Y(a) - Y(b)| with Rec. 601 weights, rounded
};

struct DiffGateConfig {
  int pixel_threshold = 40;              // strict: delta > threshold is a change
  double min_component_fraction = 0.005; // strict: fraction < this discards
  Connectivity connectivity = Connectivity::Four;
  ChannelReduction reduction = ChannelReduction::MaxAbs;
};

/// Throws ValidationError unless threshold is in [0, 255] and the fraction in (0, 1).
void validate(const DiffGateConfig& cfg);

struct ComponentStats {
  std::uint64_t changed_pixel_count = 0;
  std::uint64_t component_count = 0;
  std::uint64_t largest_component_size = 0;
  double largest_component_fraction = 0.0;

  bool operator==(const ComponentStats&) const = default;
};

/// Row-major binary mask, one byte per pixel (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::uint64_t count() const;

  bool operator==(const Mask&) const = default;
};

/// Throws DimensionMismatch when a and b differ in size.
Mask change_mask(const Image& a, const Image& b, int threshold,
                 ChannelReduction reduction = ChannelReduction::MaxAbs);

ComponentStats label_components(const Mask& mask, Connectivity connectivity = Connectivity::Four);

/// As label_components, also returning the per-pixel label (0 = background,
/// components numbered 1..n in raster order of first appearance).
ComponentStats label_components(const Mask& mask, std::vector<std::uint32_t>& labels,
                                Connectivity connectivity = Connectivity::Four);

enum class Verdict { Pass, Discard };

struct GateResult {
  Verdict verdict = Verdict::Discard;
  ComponentStats stats;
};

GateResult low_level_check(const Image& source, const Image& edited, const DiffGateConfig& cfg = {});

std::string to_string(Verdict v);

}  // namespace editmine
