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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "editmine/common.hpp"

namespace editmine {

struct EditInstruction {
  std::size_t edit_index = 0;
  std::string text;
  bool is_composite = false;

  bool operator==(const EditInstruction&) const = default;
};

/// One text-to-image prompt and the edits to mine against images generated
/// from it. bundle_id is a content hash; equal content gives an equal id.
struct PromptBundle {
  std::string bundle_id;
  std::string t2i_prompt;
  std::vector<EditInstruction> edits;
  /// Optional free-form label copied onto mined records ("category" key).
  std::optional<std::string> category;

  bool operator==(const PromptBundle&) const = default;
};

/// Malformed JSON. byte_offset points at the offending input byte.
class BundleParseError : public ValidationError {
 public:
  BundleParseError(const std::string& what, std::size_t offset)
      : ValidationError(what), byte_offset(offset) {}
  std::size_t byte_offset;
};

/// Well-formed JSON that violates the bundle schema at array element `index`.
class BundleValidationError : public ValidationError {
 public:
  BundleValidationError(const std::string& what, std::size_t idx)
      : ValidationError(what), element_index(idx) {}
  std::size_t element_index;
};

struct BundleParseOptions {
  std::size_t max_edits = 16;
};

/// Parses `[{"prompt": str, "edits": [str, ...]}, ...]`. Order is preserved and
/// every instruction starts with is_composite = false.
std::vector<PromptBundle> parse_bundles(std::string_view raw, const BundleParseOptions& opts = {});

/// Inverse of parse_bundles for valid bundles.
std::string serialize_bundles(const std::vector<PromptBundle>& bundles);

/// Flags the last instruction of a 2+ edit bundle as the composite one.
PromptBundle mark_composites(PromptBundle bundle);

/// Hex digest of the canonical form: sorted keys, whitespace runs collapsed.
std::string compute_bundle_id(std::string_view t2i_prompt, const std::vector<std::string>& edits);

}  // namespace editmine
