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

#include "editmine/prompt_io.hpp"

#include <cctype>

#include "json.hpp"

namespace editmine {

using nlohmann::json;

namespace {

std::string normalize_ws(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::string require_text(const json& v, const char* field, std::size_t idx) {
  if (!v.is_string()) {
    throw BundleValidationError(std::string("element ") + std::to_string(idx) + ": \"" + field +
                                    "\" must be a string",
                                idx);
  }
  auto s = v.get<std::string>();
  if (trim(s).empty()) {
    throw BundleValidationError(std::string("element ") + std::to_string(idx) + ": \"" + field +
                                    "\" is empty",
                                idx);
  }
  return s;
}

}  // namespace

std::string compute_bundle_id(std::string_view t2i_prompt, const std::vector<std::string>& edits) {
  json canon = json::object();
  canon["prompt"] = normalize_ws(t2i_prompt);
  json e = json::array();
  for (const auto& s : edits) e.push_back(normalize_ws(s));
  canon["edits"] = std::move(e);
  return sha256_hex(canon.dump());
}

std::vector<PromptBundle> parse_bundles(std::string_view raw, const BundleParseOptions& opts) {
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw BundleParseError(e.what(), e.byte);
  }
  if (!doc.is_array()) throw BundleParseError("expected a JSON array of bundles", 0);

  std::vector<PromptBundle> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& el = doc[i];
    if (!el.is_object()) throw BundleValidationError("element " + std::to_string(i) + " is not an object", i);
    if (!el.contains("prompt")) throw BundleValidationError("element " + std::to_string(i) + ": missing \"prompt\"", i);
    if (!el.contains("edits")) throw BundleValidationError("element " + std::to_string(i) + ": missing \"edits\"", i);

    PromptBundle b;
    b.t2i_prompt = require_text(el["prompt"], "prompt", i);
    const auto& edits = el["edits"];
    if (!edits.is_array() || edits.empty()) {
      throw BundleValidationError("element " + std::to_string(i) + ": \"edits\" must be a non-empty array", i);
    }
    if (edits.size() > opts.max_edits) {
      throw BundleValidationError("element " + std::to_string(i) + ": " + std::to_string(edits.size()) +
                                      " edits exceeds the limit of " + std::to_string(opts.max_edits),
                                  i);
    }
    std::vector<std::string> texts;
    for (std::size_t k = 0; k < edits.size(); ++k) {
      texts.push_back(require_text(edits[k], "edits", i));
      b.edits.push_back(EditInstruction{k, texts.back(), false});
    }
    if (el.contains("category")) {
      if (!el["category"].is_string()) {
        throw BundleValidationError("element " + std::to_string(i) + ": \"category\" must be a string", i);
      }
      b.category = el["category"].get<std::string>();
    }
    b.bundle_id = compute_bundle_id(b.t2i_prompt, texts);
    out.push_back(std::move(b));
  }
  return out;
}

std::string serialize_bundles(const std::vector<PromptBundle>& bundles) {
  json arr = json::array();
  for (const auto& b : bundles) {
    json el = json::object();
    el["prompt"] = b.t2i_prompt;
    json e = json::array();
    for (const auto& ins : b.edits) e.push_back(ins.text);
    el["edits"] = std::move(e);
    if (b.category) el["category"] = *b.category;
    arr.push_back(std::move(el));
  }
  return arr.dump(2);
}

PromptBundle mark_composites(PromptBundle bundle) {
  for (auto& e : bundle.edits) e.is_composite = false;
  if (bundle.edits.size() >= 2) bundle.edits.back().is_composite = true;
  return bundle;
}

}  // namespace editmine
