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

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace editmine {

class DimensionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved 8-bit RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  std::uint8_t* at(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  void set(int x, int y, std::array<std::uint8_t, 3> c) {
    auto* p = at(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  bool operator==(const Image&) const = default;
};

/// A persisted image. image_id is a digest of decoded pixels, never of the
/// PNG container, so re-encoding does not change identity.
struct ImageRef {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::string storage_path;

  bool operator==(const ImageRef&) const = default;
};

/// SHA-256 over dimensions and raw RGB bytes.
std::string image_digest(const Image& img);

std::vector<std::uint8_t> encode_png(const Image& img, int compression_level = 1);

/// Decodes any PNG libpng understands into 8-bit RGB (alpha is dropped,
/// palette/gray/16-bit are expanded). Throws std::runtime_error on corrupt data.
Image decode_png(std::span<const std::uint8_t> png);

}  // namespace editmine
