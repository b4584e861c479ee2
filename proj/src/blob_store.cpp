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

#include "editmine/blob_store.hpp"

#include "editmine/common.hpp"

namespace editmine {

namespace fs = std::filesystem;

BlobStore::BlobStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

namespace {

std::string relative_path_for(const std::string& id) { return id.substr(0, 2) + "/" + id + ".png"; }

}  // namespace

ImageRef BlobStore::put(const Image& img) {
  const auto png = encode_png(img);
  return put_png(png, img);
}

ImageRef BlobStore::put_png(std::span<const std::uint8_t> png, const Image& decoded) {
  ImageRef ref{image_digest(decoded), decoded.width, decoded.height, ""};
  ref.storage_path = relative_path_for(ref.image_id);
  const auto path = root_ / ref.storage_path;
  if (!fs::exists(path)) {
    write_file_atomic(path.string(),
                      std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
  }
  return ref;
}

fs::path BlobStore::absolute_path(const ImageRef& ref) const {
  return root_ / (ref.storage_path.empty() ? relative_path_for(ref.image_id) : ref.storage_path);
}

bool BlobStore::contains(const ImageRef& ref) const { return fs::exists(absolute_path(ref)); }

std::vector<std::uint8_t> BlobStore::read_png(const ImageRef& ref) const {
  const auto bytes = read_file(absolute_path(ref).string());
  return {bytes.begin(), bytes.end()};
}

Image BlobStore::load(const ImageRef& ref) const {
  const auto bytes = read_png(ref);
  return decode_png(bytes);
}

bool BlobStore::verify(const ImageRef& ref) const {
  if (!contains(ref)) return false;
  try {
    const auto img = load(ref);
    return img.width == ref.width && img.height == ref.height && image_digest(img) == ref.image_id;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace editmine
