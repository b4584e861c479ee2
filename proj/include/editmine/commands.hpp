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

// Command implementations behind the editmine CLI. Each returns a process
// exit code and writes human output to `out`, diagnostics to `err`.

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "editmine/calibration.hpp"
#include "editmine/config.hpp"
#include "editmine/dataset_store.hpp"
#include "editmine/scheduler.hpp"
#include "editmine/selection.hpp"
#include "editmine/sim_backend.hpp"

namespace editmine {

enum ExitCode : int {
  kExitOk = 0,
  kExitNegative = 1,  // diffgate discarded the pair
  kExitUsage = 2,     // bad flags, config or input files
  kExitRuntime = 3,
};

struct MineOptions {
  RunConfig config = default_run_config();
  std::optional<std::string> prompts_path;
  bool dry_run = false;
};

/// Generates, mines, hard-scores and selects. Writes under config.output_dir:
/// dataset.jsonl, stage_report.{json,txt}, run.json, audit.jsonl, blobs/ and
/// checkpoint/.
int cmd_mine(const MineOptions& opts, std::ostream& out, std::ostream& err);

struct AugmentOptions {
  RunConfig config = default_run_config();
  /// Directory holding dataset.jsonl and blobs/ from a mine run.
  std::string dataset_dir;
};

/// Writes augmented.jsonl and augment_report.{json,txt} next to the input.
int cmd_augment(const AugmentOptions& opts, std::ostream& out, std::ostream& err);

struct CalibrateOptions {
  std::string scores_path;
  std::optional<std::string> predictions_path;
  std::optional<std::string> report_path;
  double operating_threshold = 4.7;
  double positive_baseline = 4.0;
  std::vector<double> bucket_edges = default_bucket_edges();
};

/// Rows of scores.jsonl: {triplet_id, rater_id, axis, value}. Rows of the
/// optional predictions file: {triplet_id, adherence, aesthetic}.
int cmd_calibrate(const CalibrateOptions& opts, std::ostream& out, std::ostream& err);

struct DiffGateOptions {
  std::string a_path;
  std::string b_path;
  DiffGateConfig gate;
};

/// Exit 0 on pass, 1 on discard.
int cmd_diffgate(const DiffGateOptions& opts, std::ostream& out, std::ostream& err);

struct StatsOptions {
  std::optional<std::string> dataset_path;
  /// JSON with {"stages": [{stage, method, count}], "attempts"?} or a bare array.
  std::optional<std::string> stages_path;
  std::optional<std::int64_t> attempts;
  bool json_output = false;
};

int cmd_stats(const StatsOptions& opts, std::ostream& out, std::ostream& err);

struct SimServerOptions {
  SimOptions sim;
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Serves until the process is killed. Prints "listening on <url>" once bound.
int cmd_sim_server(const SimServerOptions& opts, std::ostream& out, std::ostream& err);

/// Stage rows of a mine run.
std::vector<StageRow> mine_stage_rows(const MiningCounters& c, std::int64_t quality_pass, std::int64_t selected);

/// Stage rows of an augment run.
std::vector<StageRow> augment_stage_rows(std::int64_t forward, std::int64_t after_inversion,
                                         std::int64_t after_composition, std::int64_t after_filter);

/// Loads bundles from a JSON file and marks composites.
std::vector<PromptBundle> load_bundles(const std::string& path);

struct DryRunEstimate {
  std::uint64_t sources = 0;
  std::uint64_t jobs = 0;
  double max_gpu_hours = 0;
};

DryRunEstimate estimate_run(const RunConfig& cfg, const std::vector<PromptBundle>& bundles);

}  // namespace editmine
