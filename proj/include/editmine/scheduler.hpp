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

// Source generation, job enumeration and the budget-bounded mining loop.
//
// Sources are generated N per bundle and gated for plausibility. Every
// (plausible source, edit, retry ordinal) triple becomes one job. Jobs are
// drawn uniformly without replacement until the queue drains or the budget is
// spent; a job edits, pre-scores, runs the two boolean checks and the
// low-level check, and survivors enter the candidate pool.

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "editmine/diff_gate.hpp"
#include "editmine/gateway.hpp"
#include "editmine/prompt_io.hpp"
#include "json.hpp"

namespace editmine {

struct PipelineConfig {
  int seeds_per_prompt = 10;        // N
  int retries_per_instruction = 5;  // M
  double t_aes = 4.7;
  double t_adh = 4.7;
  double t_inv_aes = 4.7;
  double t_inv_adh = 4.7;
  std::uint64_t master_seed = 0;
  int max_parallel_jobs = 1;
  /// Limit on edit-job spend. Infinity means unlimited.
  double budget_gpu_hours = std::numeric_limits<double>::infinity();
  int generator_steps = 4;
  int editor_steps_min = 18;
  int editor_steps_max = 28;
  bool low_level_check = true;
};

/// Throws ValidationError on N < 1, M < 1, thresholds outside [1, 5],
/// max_parallel_jobs < 1, a negative or NaN budget, or a bad step range.
void validate(const PipelineConfig& cfg);

/// A generated image that passed the plausibility gate, with its bundle.
struct SourceImage {
  ImageRef image;
  PromptBundle bundle;
  int seed_index = 0;  // 1..N
  std::uint64_t t2i_seed = 0;
};

struct JobKey {
  std::string source_image_id;
  std::string bundle_id;
  std::size_t edit_index = 0;
  int retry_ordinal = 1;  // 1..M

  std::string str() const;
  auto operator<=>(const JobKey&) const = default;
};

struct Job {
  JobKey key;
  /// Position in enumeration order; results are collected in this order.
  std::size_t ordinal = 0;
  std::size_t source_index = 0;
  std::string instruction;
  std::uint64_t seed = 0;
  int editor_steps = 0;
};

/// Seed for the t2i call that produces source `seed_index` of a bundle.
std::uint64_t t2i_seed_for(std::uint64_t master_seed, const std::string& bundle_id, int seed_index);

/// Seed for one edit job, a digest of the master seed and the job key.
std::uint64_t job_seed_for(std::uint64_t master_seed, const JobKey& key);

class JobQueue {
 public:
  JobQueue() = default;
  explicit JobQueue(std::vector<Job> jobs) : jobs_(std::move(jobs)) {}

  /// Removes and returns a uniformly chosen remaining job.
  std::optional<Job> draw_next(Rng& rng);

  /// Drops a job by key without drawing it (used when resuming).
  bool remove(const JobKey& key);

  std::size_t size() const { return jobs_.size(); }
  bool empty() const { return jobs_.empty(); }

 private:
  std::vector<Job> jobs_;
};

/// Enumerates sources x edits x M jobs in source, edit, retry order.
JobQueue enumerate_jobs(const std::vector<SourceImage>& sources, int retries_per_instruction,
                        std::uint64_t master_seed, int editor_steps_min = 18, int editor_steps_max = 28);

/// Edit-job spend. Amounts are held in integer nano-GPU-hours so totals do
/// not depend on the order jobs complete in.
class BudgetLedger {
 public:
  explicit BudgetLedger(double limit_gpu_hours = std::numeric_limits<double>::infinity());

  bool exhausted() const;
  void charge(double gpu_hours);

  double limit_gpu_hours() const { return limit_; }
  double consumed_gpu_hours() const;
  std::int64_t consumed_nano() const { return consumed_nano_; }

  std::uint64_t jobs_executed = 0;
  std::uint64_t jobs_unsampled = 0;

 private:
  double limit_;
  std::int64_t consumed_nano_ = 0;
};

std::int64_t to_nano_gpu_hours(double gpu_hours);

enum class JobOutcome {
  EditFailed,           // gateway error before an edited image existed
  PreScoreUnavailable,  // pre-validator never returned a usable score
  PreScoreRejected,     // below T_aes or T_adh
  CheckFailed,          // a boolean check errored
  CheckRejected,        // a boolean check answered no
  LowLevelDiscard,      // diff gate discarded the edit
  Accepted,
};

std::string to_string(JobOutcome o);
JobOutcome job_outcome_from_string(const std::string& s);

struct Candidate {
  JobKey key;
  std::size_t ordinal = 0;
  ImageRef source;
  ImageRef edited;
  std::string instruction;
  std::string t2i_prompt;
  std::optional<std::string> category;
  std::uint64_t t2i_seed = 0;
  std::uint64_t edit_seed = 0;
  ScorePair pre_scores;
  std::optional<ComponentStats> low_level;
};

nlohmann::json candidate_to_json(const Candidate& c);
Candidate candidate_from_json(const nlohmann::json& j);

struct JobRecord {
  JobKey key;
  std::size_t ordinal = 0;
  JobOutcome outcome = JobOutcome::EditFailed;
  double cost_gpu_hours = 0;
  /// Name of the gateway error class, when one ended the job.
  std::string error;
  std::optional<Candidate> candidate;
};

struct MiningCounters {
  std::uint64_t sources_attempted = 0;
  std::uint64_t sources_generated = 0;
  std::uint64_t sources_plausible = 0;
  std::uint64_t generation_failures = 0;
  std::uint64_t jobs_enumerated = 0;
  std::uint64_t jobs_executed = 0;
  std::uint64_t edits_generated = 0;
  std::uint64_t pre_filter_pass = 0;
  std::uint64_t bool_check_pass = 0;
  std::uint64_t low_level_pass = 0;
  std::uint64_t failed = 0;
  std::uint64_t score_unavailable = 0;
  std::uint64_t protocol_violations = 0;
};

nlohmann::json counters_json(const MiningCounters& c);

struct MiningResult {
  std::vector<SourceImage> sources;
  /// Accepted candidates in enumeration order.
  std::vector<Candidate> pool;
  std::vector<JobRecord> executed;
  MiningCounters counters;
  BudgetLedger ledger;
  /// Spend on generation and plausibility, outside the edit budget.
  double generation_gpu_hours = 0;
};

struct MiningOptions {
  DiffGateConfig diff_gate;
  /// Directory for sources.jsonl / jobs.jsonl checkpoints. Empty disables.
  std::filesystem::path checkpoint_dir;
  /// Reuse checkpointed sources and skip checkpointed jobs.
  bool resume = false;
};

/// Generates and gates N sources per bundle. Failed generations are counted
/// and skipped.
std::vector<SourceImage> generate_sources(const PipelineConfig& cfg, const std::vector<PromptBundle>& bundles,
                                          ModelGateway& gateway, MiningCounters& counters, double& cost_gpu_hours,
                                          const MiningOptions& opts = {});

/// Runs one job to completion. Never throws for gateway errors.
JobRecord execute_job(const Job& job, const SourceImage& source, const PipelineConfig& cfg, ModelGateway& gateway,
                      const DiffGateConfig& gate, const Image* source_pixels);

MiningResult run_mining(const PipelineConfig& cfg, const std::vector<PromptBundle>& bundles, ModelGateway& gateway,
                        const MiningOptions& opts = {});

/// Runs the job loop over already generated sources.
MiningResult run_jobs(const PipelineConfig& cfg, std::vector<SourceImage> sources, ModelGateway& gateway,
                      const MiningOptions& opts = {});

}  // namespace editmine
