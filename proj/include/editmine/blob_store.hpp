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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "editmine/image.hpp"

namespace editmine {

// Content-addressed PNG store laid out as <root>/<id[0:2]>/<id>.png.
//
// Writes are write-once by image_id: a second put of identical pixels is a
// no-op, and concurrent identical writes race benignly through rename.
// storage_path in returned refs is relative to the root so datasets can be
// moved as a directory.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  ImageRef put(const Image& img);

  /// Stores PNG bytes received from an endpoint verbatim. `decoded` must be
  /// the decoding of `png`; it is passed in to avoid decoding twice.
  ImageRef put_png(std::span<const std::uint8_t> png, const Image& decoded);

  bool contains(const ImageRef& ref) const;
  std::vector<std::uint8_t> read_png(const ImageRef& ref) const;
  Image load(const ImageRef& ref) const;

  /// Decodes the blob and checks its pixel digest against ref.image_id.
  bool verify(const ImageRef& ref) const;

  std::filesystem::path absolute_path(const ImageRef& ref) const;

 private:
  std::filesystem::path root_;
};

}  // namespace editmine
