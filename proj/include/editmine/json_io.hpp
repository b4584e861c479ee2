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

#include "editmine/diff_gate.hpp"
#include "editmine/gateway.hpp"
#include "editmine/image.hpp"
#include "json.hpp"

namespace editmine {

inline void to_json(nlohmann::json& j, const ImageRef& r) {
  j = {{"image_id", r.image_id}, {"width", r.width}, {"height", r.height}, {"storage_path", r.storage_path}};
}

inline void from_json(const nlohmann::json& j, ImageRef& r) {
  r.image_id = j.at("image_id").get<std::string>();
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  r.storage_path = j.value("storage_path", "");
}

inline void to_json(nlohmann::json& j, const ScorePair& s) {
  j = {{"aesthetic", s.aesthetic}, {"adherence", s.adherence}};
  if (s.clamped) j["clamped_from"] = {{"aesthetic", s.clamped->raw_aesthetic}, {"adherence", s.clamped->raw_adherence}};
}

inline void from_json(const nlohmann::json& j, ScorePair& s) {
  s.aesthetic = j.at("aesthetic").get<double>();
  s.adherence = j.at("adherence").get<double>();
  s.clamped.reset();
  if (j.contains("clamped_from")) {
    const auto& c = j.at("clamped_from");
    s.clamped = ScoreDiagnostics{c.at("aesthetic").get<double>(), c.at("adherence").get<double>()};
  }
}

inline void to_json(nlohmann::json& j, const ComponentStats& s) {
  j = {{"changed_pixel_count", s.changed_pixel_count},
       {"component_count", s.component_count},
       {"largest_component_size", s.largest_component_size},
       {"largest_component_fraction", s.largest_component_fraction}};
}

inline void from_json(const nlohmann::json& j, ComponentStats& s) {
  s.changed_pixel_count = j.at("changed_pixel_count").get<std::uint64_t>();
  s.component_count = j.at("component_count").get<std::uint64_t>();
  s.largest_component_size = j.at("largest_component_size").get<std::uint64_t>();
  s.largest_component_fraction = j.at("largest_component_fraction").get<double>();
}

}  // namespace editmine
