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

// Triplet manifests (JSONL, one record per line) and stage reports.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "editmine/blob_store.hpp"
#include "editmine/gateway.hpp"
#include "editmine/image.hpp"
#include "json.hpp"

namespace editmine {

enum class DerivationKind { Forward, Inverted, Composed };

std::string to_string(DerivationKind k);
DerivationKind derivation_from_string(const std::string& s);

struct Derivation {
  DerivationKind kind = DerivationKind::Forward;
  /// Empty for Forward, one id for Inverted, an ordered pair for Composed.
  std::vector<std::string> parent_ids;

  bool operator==(const Derivation&) const = default;
};

struct TripletRecord {
  std::string record_id;
  ImageRef source_image;
  std::string instruction;
  ImageRef edited_image;
  /// Hard-validator scores. Always present on Forward records; Inverted
  /// records get them from the backward filter; Composed records have none.
  std::optional<ScorePair> hard_scores;
  Derivation derivation;
  std::string bundle_id;
  std::size_t edit_index = 0;
  std::optional<std::uint64_t> t2i_seed;
  std::optional<std::uint64_t> edit_seed;
  std::optional<std::string> category_tag;
  std::string t2i_prompt;

  bool operator==(const TripletRecord&) const = default;
};

using Dataset = std::vector<TripletRecord>;

nlohmann::json record_to_json(const TripletRecord& r);
TripletRecord record_from_json(const nlohmann::json& j);

/// A manifest line that failed to load. `line` is 1-based.
class ManifestError : public std::runtime_error {
 public:
  ManifestError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

/// Checks one record in isolation: non-empty id, scores in [1, 5], Forward
/// records carry both seeds and hard scores, parent arity matches the kind.
/// Throws ValidationError.
void validate_record(const TripletRecord& r);

/// Single-writer JSONL appender. Each append writes one full line and flushes.
class ManifestWriter {
 public:
  explicit ManifestWriter(const std::string& path, bool append = false);
  ~ManifestWriter();
  ManifestWriter(const ManifestWriter&) = delete;
  ManifestWriter& operator=(const ManifestWriter&) = delete;

  void append(const TripletRecord& r);

 private:
  std::FILE* file_ = nullptr;
};

/// Writes the whole dataset to `path` through a temporary file and rename.
void write_manifest(const std::string& path, const Dataset& ds);

struct LoadOptions {
  /// When set, every image must exist in the store and decode to its id.
  const BlobStore* store = nullptr;
  bool verify_blobs = false;
};

/// Loads and validates a manifest: per-record invariants, unique ids, parent
/// ids resolving to earlier-or-later records, and (optionally) image blobs.
/// Throws ManifestError naming the offending line.
Dataset load_manifest(const std::string& path, const LoadOptions& opts = {});

struct StageRow {
  std::string stage;
  std::string method;
  std::int64_t count = 0;
};

struct StageDelta {
  std::optional<double> percent;  // absent for the first row or a zero predecessor
};

/// Delta of each row against its predecessor, in percent.
std::vector<StageDelta> stage_deltas(const std::vector<StageRow>& rows);

/// Signed two-decimal rendering ("+495.90", "-56.00", "+0.00"); "n/a" when absent.
std::string format_delta(const std::optional<double>& percent);

struct StageReport {
  std::vector<StageRow> rows;
  /// Total attempts used for the overall survival rate, when known.
  std::optional<std::int64_t> attempts;
};

nlohmann::json stage_report_json(const StageReport& report);
std::string stage_report_text(const StageReport& report);

enum class DistributionAxis { Category, AspectRatio, Derivation };

/// Histogram keyed by category tag ("(none)" when absent), exact "WxH" of the
/// edited image, or derivation kind.
std::map<std::string, std::int64_t> distribution_report(const Dataset& ds, DistributionAxis axis);

}  // namespace editmine
