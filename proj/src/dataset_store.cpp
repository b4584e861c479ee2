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

#include "editmine/dataset_store.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "editmine/common.hpp"
#include "editmine/json_io.hpp"

namespace editmine {

using nlohmann::json;

std::string to_string(DerivationKind k) {
  switch (k) {
    case DerivationKind::Forward:
      return "forward";
    case DerivationKind::Inverted:
      return "inverted";
    case DerivationKind::Composed:
      return "composed";
  }
  return "forward";
}

DerivationKind derivation_from_string(const std::string& s) {
  if (s == "forward") return DerivationKind::Forward;
  if (s == "inverted") return DerivationKind::Inverted;
  if (s == "composed") return DerivationKind::Composed;
  throw ValidationError("unknown derivation kind '" + s + "'");
}

json record_to_json(const TripletRecord& r) {
  json j;
  j["record_id"] = r.record_id;
  j["source_image"] = r.source_image;
  j["instruction"] = r.instruction;
  j["edited_image"] = r.edited_image;
  j["hard_scores"] = r.hard_scores ? json(*r.hard_scores) : json(nullptr);
  j["derivation"] = {{"kind", to_string(r.derivation.kind)}, {"parent_ids", r.derivation.parent_ids}};
  j["bundle_id"] = r.bundle_id;
  j["edit_index"] = r.edit_index;
  j["seeds"] = {{"t2i_seed", r.t2i_seed ? json(*r.t2i_seed) : json(nullptr)},
                {"edit_seed", r.edit_seed ? json(*r.edit_seed) : json(nullptr)}};
  j["category_tag"] = r.category_tag ? json(*r.category_tag) : json(nullptr);
  j["t2i_prompt"] = r.t2i_prompt;
  return j;
}

TripletRecord record_from_json(const json& j) {
  TripletRecord r;
  r.record_id = j.at("record_id").get<std::string>();
  r.source_image = j.at("source_image").get<ImageRef>();
  r.instruction = j.at("instruction").get<std::string>();
  r.edited_image = j.at("edited_image").get<ImageRef>();
  if (j.contains("hard_scores") && !j.at("hard_scores").is_null()) r.hard_scores = j.at("hard_scores").get<ScorePair>();
  const auto& d = j.at("derivation");
  r.derivation.kind = derivation_from_string(d.at("kind").get<std::string>());
  r.derivation.parent_ids = d.value("parent_ids", std::vector<std::string>{});
  r.bundle_id = j.value("bundle_id", "");
  r.edit_index = j.value("edit_index", std::size_t{0});
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (s.contains("t2i_seed") && !s.at("t2i_seed").is_null()) r.t2i_seed = s.at("t2i_seed").get<std::uint64_t>();
    if (s.contains("edit_seed") && !s.at("edit_seed").is_null()) r.edit_seed = s.at("edit_seed").get<std::uint64_t>();
  }
  if (j.contains("category_tag") && !j.at("category_tag").is_null()) {
    r.category_tag = j.at("category_tag").get<std::string>();
  }
  r.t2i_prompt = j.value("t2i_prompt", "");
  return r;
}

void validate_record(const TripletRecord& r) {
  if (r.record_id.empty()) throw ValidationError("empty record_id");
  if (r.source_image.image_id.empty() || r.edited_image.image_id.empty()) {
    throw ValidationError("record " + r.record_id + " has an empty image id");
  }
  if (r.instruction.empty()) throw ValidationError("record " + r.record_id + " has an empty instruction");
  if (r.hard_scores) {
    for (double v : {r.hard_scores->aesthetic, r.hard_scores->adherence}) {
      if (!(v >= 1.0 && v <= 5.0)) throw ValidationError("record " + r.record_id + " has a score outside [1, 5]");
    }
  }
  const auto arity = r.derivation.parent_ids.size();
  switch (r.derivation.kind) {
    case DerivationKind::Forward:
      if (arity != 0) throw ValidationError("forward record " + r.record_id + " has parents");
      if (!r.t2i_seed || !r.edit_seed) throw ValidationError("forward record " + r.record_id + " lacks seeds");
      if (!r.hard_scores) throw ValidationError("forward record " + r.record_id + " lacks hard scores");
      break;
    case DerivationKind::Inverted:
      if (arity != 1) throw ValidationError("inverted record " + r.record_id + " needs exactly one parent");
      break;
    case DerivationKind::Composed:
      if (arity != 2 || r.derivation.parent_ids[0] == r.derivation.parent_ids[1]) {
        throw ValidationError("composed record " + r.record_id + " needs two distinct parents");
      }
      break;
  }
}

ManifestWriter::ManifestWriter(const std::string& path, bool append) {
  file_ = std::fopen(path.c_str(), append ? "ab" : "wb");
  if (!file_) throw std::runtime_error("cannot open manifest " + path);
}

ManifestWriter::~ManifestWriter() {
  if (file_) std::fclose(file_);
}

void ManifestWriter::append(const TripletRecord& r) {
  validate_record(r);
  const auto line = record_to_json(r).dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw std::runtime_error("manifest write failed");
  }
}

void write_manifest(const std::string& path, const Dataset& ds) {
  std::string out;
  for (const auto& r : ds) {
    validate_record(r);
    out += record_to_json(r).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

Dataset load_manifest(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  Dataset ds;
  std::vector<std::size_t> line_of;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    TripletRecord r;
    try {
      r = record_from_json(json::parse(line));
      validate_record(r);
    } catch (const std::exception& e) {
      throw ManifestError(e.what(), lineno);
    }
    if (!ids.insert(r.record_id).second) throw ManifestError("duplicate record_id " + r.record_id, lineno);
    if (opts.store) {
      for (const auto* ref : {&r.source_image, &r.edited_image}) {
        const bool ok = opts.verify_blobs ? opts.store->verify(*ref) : opts.store->contains(*ref);
        if (!ok) throw ManifestError("dangling or corrupt image " + ref->image_id, lineno);
      }
    }
    ds.push_back(std::move(r));
    line_of.push_back(lineno);
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (const auto& p : ds[i].derivation.parent_ids) {
      if (!ids.count(p)) throw ManifestError("dangling parent id " + p, line_of[i]);
    }
  }
  return ds;
}

std::vector<StageDelta> stage_deltas(const std::vector<StageRow>& rows) {
  std::vector<StageDelta> out(rows.size());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto prev = rows[i - 1].count;
    if (prev == 0) continue;
    out[i].percent = static_cast<double>(rows[i].count - prev) / static_cast<double>(prev) * 100.0;
  }
  return out;
}

std::string format_delta(const std::optional<double>& percent) {
  if (!percent) return "n/a";
  // Round half away from zero at two decimals, then never print "-0.00".
  double v = std::round(*percent * 100.0) / 100.0;
  if (v == 0.0) v = 0.0;
  return fmt::format("{:+.2f}", v);
}

json stage_report_json(const StageReport& report) {
  const auto deltas = stage_deltas(report.rows);
  json rows = json::array();
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    json row = {{"stage", r.stage}, {"method", r.method}, {"count", r.count}};
    if (deltas[i].percent) {
      row["delta_percent"] = std::round(*deltas[i].percent * 100.0) / 100.0;
      row["delta"] = format_delta(deltas[i].percent);
    } else {
      row["delta_percent"] = nullptr;
      row["delta"] = i == 0 ? json(nullptr) : json("n/a");
    }
    rows.push_back(std::move(row));
  }
  json j = {{"stages", rows}};
  if (report.attempts) {
    j["attempts"] = *report.attempts;
    if (*report.attempts > 0 && !report.rows.empty()) {
      const double rate = static_cast<double>(report.rows.back().count) / static_cast<double>(*report.attempts);
      j["survival_rate_percent"] = std::round(rate * 10000.0) / 100.0;
    } else {
      j["survival_rate_percent"] = nullptr;
    }
  }
  return j;
}

std::string stage_report_text(const StageReport& report) {
  const auto deltas = stage_deltas(report.rows);
  std::size_t ws = 5, wm = 6, wc = 5;
  for (const auto& r : report.rows) {
    ws = std::max(ws, r.stage.size());
    wm = std::max(wm, r.method.size());
    wc = std::max(wc, std::to_string(r.count).size());
  }
  std::string out = fmt::format("{:<{}}  {:<{}}  {:>{}}  {:>8}\n", "Stage", ws, "Method", wm, "Count", wc, "Delta %");
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    const std::string d = i == 0 ? "-" : format_delta(deltas[i].percent);
    out += fmt::format("{:<{}}  {:<{}}  {:>{}}  {:>8}\n", r.stage, ws, r.method, wm, r.count, wc, d);
  }
  if (report.attempts && *report.attempts > 0 && !report.rows.empty()) {
    const double rate = static_cast<double>(report.rows.back().count) / static_cast<double>(*report.attempts);
    out += fmt::format("Survival rate: {:.2f}% of {} attempts\n", rate * 100.0, *report.attempts);
  }
  return out;
}

std::map<std::string, std::int64_t> distribution_report(const Dataset& ds, DistributionAxis axis) {
  std::map<std::string, std::int64_t> h;
  for (const auto& r : ds) {
    switch (axis) {
      case DistributionAxis::Category:
        ++h[r.category_tag.value_or("(none)")];
        break;
      case DistributionAxis::AspectRatio:
        ++h[std::to_string(r.edited_image.width) + "x" + std::to_string(r.edited_image.height)];
        break;
      case DistributionAxis::Derivation:
        ++h[to_string(r.derivation.kind)];
        break;
    }
  }
  return h;
}

}  // namespace editmine
