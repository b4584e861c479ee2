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

#include "editmine/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "editmine/json_io.hpp"

namespace editmine {

using nlohmann::json;

void validate(const PipelineConfig& cfg) {
  if (cfg.seeds_per_prompt < 1) throw ValidationError("N (seeds per prompt) must be >= 1");
  if (cfg.retries_per_instruction < 1) throw ValidationError("M (retries per instruction) must be >= 1");
  for (double t : {cfg.t_aes, cfg.t_adh, cfg.t_inv_aes, cfg.t_inv_adh}) {
    if (!(t >= 1.0 && t <= 5.0)) throw ValidationError("score thresholds must be in [1, 5]");
  }
  if (cfg.max_parallel_jobs < 1) throw ValidationError("max_parallel_jobs must be >= 1");
  if (std::isnan(cfg.budget_gpu_hours) || cfg.budget_gpu_hours < 0) {
    throw ValidationError("budget_gpu_hours must be >= 0");
  }
  if (cfg.generator_steps < 1) throw ValidationError("generator_steps must be >= 1");
  if (cfg.editor_steps_min < 1 || cfg.editor_steps_max < cfg.editor_steps_min) {
    throw ValidationError("editor step range must satisfy 1 <= min <= max");
  }
}

std::string JobKey::str() const {
  return source_image_id + "/" + bundle_id + "/" + std::to_string(edit_index) + "/" + std::to_string(retry_ordinal);
}

std::uint64_t t2i_seed_for(std::uint64_t master_seed, const std::string& bundle_id, int seed_index) {
  return digest_u64(key_of({"t2i", std::to_string(master_seed), bundle_id, std::to_string(seed_index)}));
}

std::uint64_t job_seed_for(std::uint64_t master_seed, const JobKey& key) {
  return digest_u64(key_of({"edit", std::to_string(master_seed), key.source_image_id, key.bundle_id,
                            std::to_string(key.edit_index), std::to_string(key.retry_ordinal)}));
}

std::optional<Job> JobQueue::draw_next(Rng& rng) {
  if (jobs_.empty()) return std::nullopt;
  const auto i = static_cast<std::size_t>(uniform_below(rng, jobs_.size()));
  Job out = std::move(jobs_[i]);
  // Swap-remove: the remaining set is what matters, not its order.
  if (i + 1 != jobs_.size()) jobs_[i] = std::move(jobs_.back());
  jobs_.pop_back();
  return out;
}

bool JobQueue::remove(const JobKey& key) {
  auto it = std::find_if(jobs_.begin(), jobs_.end(), [&](const Job& j) { return j.key == key; });
  if (it == jobs_.end()) return false;
  *it = std::move(jobs_.back());
  jobs_.pop_back();
  return true;
}

JobQueue enumerate_jobs(const std::vector<SourceImage>& sources, int retries_per_instruction,
                        std::uint64_t master_seed, int editor_steps_min, int editor_steps_max) {
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto& src = sources[s];
    for (const auto& edit : src.bundle.edits) {
      for (int j = 1; j <= retries_per_instruction; ++j) {
        Job job;
        job.key = JobKey{src.image.image_id, src.bundle.bundle_id, edit.edit_index, j};
        job.ordinal = jobs.size();
        job.source_index = s;
        job.instruction = edit.text;
        job.seed = job_seed_for(master_seed, job.key);
        Rng steps_rng(job.seed);
        job.editor_steps = static_cast<int>(uniform_int(steps_rng, editor_steps_min, editor_steps_max));
        jobs.push_back(std::move(job));
      }
    }
  }
  return JobQueue(std::move(jobs));
}

std::int64_t to_nano_gpu_hours(double gpu_hours) { return std::llround(gpu_hours * 1e9); }

BudgetLedger::BudgetLedger(double limit_gpu_hours) : limit_(limit_gpu_hours) {}

bool BudgetLedger::exhausted() const {
  if (std::isinf(limit_)) return false;
  return consumed_nano_ >= to_nano_gpu_hours(limit_);
}

void BudgetLedger::charge(double gpu_hours) { consumed_nano_ += to_nano_gpu_hours(gpu_hours); }

double BudgetLedger::consumed_gpu_hours() const { return static_cast<double>(consumed_nano_) / 1e9; }

namespace {

constexpr std::pair<JobOutcome, const char*> kOutcomeNames[] = {
    {JobOutcome::EditFailed, "edit_failed"},       {JobOutcome::PreScoreUnavailable, "pre_score_unavailable"},
    {JobOutcome::PreScoreRejected, "pre_score_rejected"}, {JobOutcome::CheckFailed, "check_failed"},
    {JobOutcome::CheckRejected, "check_rejected"}, {JobOutcome::LowLevelDiscard, "low_level_discard"},
    {JobOutcome::Accepted, "accepted"},
};

json key_json(const JobKey& k) {
  return {{"source_image_id", k.source_image_id},
          {"bundle_id", k.bundle_id},
          {"edit_index", k.edit_index},
          {"retry_ordinal", k.retry_ordinal}};
}

JobKey key_from_json(const json& j) {
  return JobKey{j.at("source_image_id").get<std::string>(), j.at("bundle_id").get<std::string>(),
                j.at("edit_index").get<std::size_t>(), j.at("retry_ordinal").get<int>()};
}

}  // namespace

std::string to_string(JobOutcome o) {
  for (const auto& [k, name] : kOutcomeNames) {
    if (k == o) return name;
  }
  return "edit_failed";
}

JobOutcome job_outcome_from_string(const std::string& s) {
  for (const auto& [k, name] : kOutcomeNames) {
    if (s == name) return k;
  }
  throw ValidationError("unknown job outcome '" + s + "'");
}

json candidate_to_json(const Candidate& c) {
  json j = {{"key", key_json(c.key)},
            {"ordinal", c.ordinal},
            {"source", c.source},
            {"edited", c.edited},
            {"instruction", c.instruction},
            {"t2i_prompt", c.t2i_prompt},
            {"t2i_seed", c.t2i_seed},
            {"edit_seed", c.edit_seed},
            {"pre_scores", c.pre_scores}};
  j["category"] = c.category ? json(*c.category) : json(nullptr);
  j["low_level"] = c.low_level ? json(*c.low_level) : json(nullptr);
  return j;
}

Candidate candidate_from_json(const json& j) {
  Candidate c;
  c.key = key_from_json(j.at("key"));
  c.ordinal = j.at("ordinal").get<std::size_t>();
  c.source = j.at("source").get<ImageRef>();
  c.edited = j.at("edited").get<ImageRef>();
  c.instruction = j.at("instruction").get<std::string>();
  c.t2i_prompt = j.at("t2i_prompt").get<std::string>();
  c.t2i_seed = j.at("t2i_seed").get<std::uint64_t>();
  c.edit_seed = j.at("edit_seed").get<std::uint64_t>();
  c.pre_scores = j.at("pre_scores").get<ScorePair>();
  if (!j.at("category").is_null()) c.category = j.at("category").get<std::string>();
  if (!j.at("low_level").is_null()) c.low_level = j.at("low_level").get<ComponentStats>();
  return c;
}

json counters_json(const MiningCounters& c) {
  return {{"sources_attempted", c.sources_attempted},
          {"sources_generated", c.sources_generated},
          {"sources_plausible", c.sources_plausible},
          {"generation_failures", c.generation_failures},
          {"jobs_enumerated", c.jobs_enumerated},
          {"jobs_executed", c.jobs_executed},
          {"edits_generated", c.edits_generated},
          {"pre_filter_pass", c.pre_filter_pass},
          {"bool_check_pass", c.bool_check_pass},
          {"low_level_pass", c.low_level_pass},
          {"failed", c.failed},
          {"score_unavailable", c.score_unavailable},
          {"protocol_violations", c.protocol_violations}};
}

namespace {

// Appends JSON lines to a checkpoint file, flushing each one.
class CheckpointFile {
 public:
  CheckpointFile() = default;
  CheckpointFile(const std::filesystem::path& path, bool append) {
    file_ = std::fopen(path.string().c_str(), append ? "ab" : "wb");
    if (!file_) throw std::runtime_error("cannot open checkpoint " + path.string());
  }
  ~CheckpointFile() {
    if (file_) std::fclose(file_);
  }
  CheckpointFile(const CheckpointFile&) = delete;
  CheckpointFile& operator=(const CheckpointFile&) = delete;

  void write(const json& j) {
    if (!file_) return;
    const auto line = j.dump() + "\n";
    std::fwrite(line.data(), 1, line.size(), file_);
    std::fflush(file_);
  }

 private:
  std::FILE* file_ = nullptr;
};

std::vector<json> read_checkpoint(const std::filesystem::path& path) {
  std::vector<json> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    // A torn final line from an interrupted write is dropped.
    auto j = json::parse(line, nullptr, false);
    if (!j.is_discarded()) out.push_back(std::move(j));
  }
  return out;
}

std::string error_name(const GatewayError& e) {
  if (dynamic_cast<const ScoreUnavailable*>(&e)) return "ScoreUnavailable";
  if (dynamic_cast<const InversionRefused*>(&e)) return "InversionRefused";
  if (dynamic_cast<const ProtocolViolation*>(&e)) return "ProtocolViolation";
  if (dynamic_cast<const ImageDimensionMismatch*>(&e)) return "ImageDimensionMismatch";
  if (dynamic_cast<const TransportError*>(&e)) return "TransportError";
  return "GatewayError";
}

// Small LRU of decoded source images for the low-level check.
class SourceCache {
 public:
  SourceCache(BlobStore& store, std::size_t capacity) : store_(store), capacity_(capacity) {}

  std::shared_ptr<const Image> get(const ImageRef& ref) {
    {
      std::lock_guard lock(mu_);
      for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->first == ref.image_id) {
          entries_.splice(entries_.begin(), entries_, it);
          return it->second;
        }
      }
    }
    auto img = std::make_shared<const Image>(store_.load(ref));
    std::lock_guard lock(mu_);
    entries_.emplace_front(ref.image_id, img);
    if (entries_.size() > capacity_) entries_.pop_back();
    return img;
  }

 private:
  BlobStore& store_;
  std::size_t capacity_;
  std::mutex mu_;
  std::list<std::pair<std::string, std::shared_ptr<const Image>>> entries_;
};

MiningCounters tally(const std::vector<JobRecord>& records, MiningCounters c) {
  c.jobs_executed = records.size();
  for (const auto& r : records) {
    const auto o = r.outcome;
    if (o != JobOutcome::EditFailed) ++c.edits_generated;
    if (o == JobOutcome::CheckFailed || o == JobOutcome::CheckRejected || o == JobOutcome::LowLevelDiscard ||
        o == JobOutcome::Accepted) {
      ++c.pre_filter_pass;
    }
    if (o == JobOutcome::LowLevelDiscard || o == JobOutcome::Accepted) ++c.bool_check_pass;
    if (o == JobOutcome::Accepted) ++c.low_level_pass;
    if (!r.error.empty()) ++c.failed;
    if (r.error == "ScoreUnavailable") ++c.score_unavailable;
    if (r.error == "ScoreUnavailable" || r.error == "ProtocolViolation") ++c.protocol_violations;
  }
  return c;
}

json job_record_json(const JobRecord& r) {
  json j = {{"key", key_json(r.key)},
            {"ordinal", r.ordinal},
            {"outcome", to_string(r.outcome)},
            {"cost_nano_gpu_hours", to_nano_gpu_hours(r.cost_gpu_hours)},
            {"error", r.error}};
  j["candidate"] = r.candidate ? candidate_to_json(*r.candidate) : json(nullptr);
  return j;
}

JobRecord job_record_from_json(const json& j) {
  JobRecord r;
  r.key = key_from_json(j.at("key"));
  r.ordinal = j.at("ordinal").get<std::size_t>();
  r.outcome = job_outcome_from_string(j.at("outcome").get<std::string>());
  r.cost_gpu_hours = static_cast<double>(j.at("cost_nano_gpu_hours").get<std::int64_t>()) / 1e9;
  r.error = j.value("error", "");
  if (!j.at("candidate").is_null()) r.candidate = candidate_from_json(j.at("candidate"));
  return r;
}

}  // namespace

std::vector<SourceImage> generate_sources(const PipelineConfig& cfg, const std::vector<PromptBundle>& bundles,
                                          ModelGateway& gateway, MiningCounters& counters, double& cost_gpu_hours,
                                          const MiningOptions& opts) {
  validate(cfg);
  const bool checkpointing = !opts.checkpoint_dir.empty();
  const auto path = opts.checkpoint_dir / "sources.jsonl";
  std::map<std::string, json> done;
  if (checkpointing && opts.resume) {
    for (auto& j : read_checkpoint(path)) {
      done[j.at("bundle_id").get<std::string>() + "#" + std::to_string(j.at("seed_index").get<int>())] = j;
    }
  }
  std::unique_ptr<CheckpointFile> out;
  if (checkpointing) {
    std::filesystem::create_directories(opts.checkpoint_dir);
    out = std::make_unique<CheckpointFile>(path, opts.resume);
  }

  std::vector<SourceImage> sources;
  std::int64_t cost_nano = 0;
  for (const auto& bundle : bundles) {
    for (int i = 1; i <= cfg.seeds_per_prompt; ++i) {
      ++counters.sources_attempted;
      const std::uint64_t seed = t2i_seed_for(cfg.master_seed, bundle.bundle_id, i);
      json line;
      if (auto it = done.find(bundle.bundle_id + "#" + std::to_string(i)); it != done.end()) {
        line = it->second;
      } else {
        line = {{"bundle_id", bundle.bundle_id}, {"seed_index", i}};
        std::int64_t spent = 0;
        Rng rng(seed);
        const auto res = sample_resolution(rng);
        try {
          auto gen = gateway.generate({bundle.t2i_prompt, seed, res.width, res.height, cfg.generator_steps});
          spent += to_nano_gpu_hours(gen.cost_gpu_hours);
          line["image"] = gen.value;
          auto ok = gateway.check_plausibility(gen.value, bundle.t2i_prompt);
          spent += to_nano_gpu_hours(ok.cost_gpu_hours);
          line["status"] = ok.value ? "plausible" : "implausible";
        } catch (const GatewayError& e) {
          spent += to_nano_gpu_hours(e.cost_gpu_hours);
          line["status"] = line.contains("image") ? "check_failed" : "generation_failed";
          line["error"] = error_name(e);
        }
        line["cost_nano_gpu_hours"] = spent;
        if (out) out->write(line);
      }
      cost_nano += line.at("cost_nano_gpu_hours").get<std::int64_t>();
      const auto status = line.at("status").get<std::string>();
      if (line.contains("image")) ++counters.sources_generated;
      if (status == "generation_failed" || status == "check_failed") ++counters.generation_failures;
      if (status == "plausible") {
        ++counters.sources_plausible;
        sources.push_back(SourceImage{line.at("image").get<ImageRef>(), bundle, i, seed});
      }
    }
  }
  cost_gpu_hours = static_cast<double>(cost_nano) / 1e9;
  return sources;
}

JobRecord execute_job(const Job& job, const SourceImage& source, const PipelineConfig& cfg, ModelGateway& gateway,
                      const DiffGateConfig& gate, const Image* source_pixels) {
  enum class Stage { Start, Edited, PrePassed, ChecksPassed };
  JobRecord rec;
  rec.key = job.key;
  rec.ordinal = job.ordinal;
  std::int64_t cost = 0;
  Stage stage = Stage::Start;
  auto fail_outcome = [&] {
    switch (stage) {
      case Stage::Start:
        return JobOutcome::EditFailed;
      case Stage::Edited:
        return JobOutcome::PreScoreUnavailable;
      case Stage::PrePassed:
        return JobOutcome::CheckFailed;
      case Stage::ChecksPassed:
        break;
    }
    return JobOutcome::LowLevelDiscard;
  };
  try {
    auto edited = gateway.edit(source.image, job.instruction, job.seed, job.editor_steps);
    cost += to_nano_gpu_hours(edited.cost_gpu_hours);
    stage = Stage::Edited;

    auto pre = gateway.score(source.image, job.instruction, edited.value.ref, Validator::Pre);
    cost += to_nano_gpu_hours(pre.cost_gpu_hours);
    const auto& sp = pre.value.scores;
    if (!(sp.aesthetic >= cfg.t_aes && sp.adherence >= cfg.t_adh)) {
      rec.outcome = JobOutcome::PreScoreRejected;
    } else {
      stage = Stage::PrePassed;
      bool checks_ok = true;
      for (auto kind : {BoolCheck::UnwantedModifications, BoolCheck::Aesthetics}) {
        auto c = gateway.check_bool(kind, source.image, job.instruction, edited.value.ref);
        cost += to_nano_gpu_hours(c.cost_gpu_hours);
        if (!c.value) {
          checks_ok = false;
          break;
        }
      }
      if (!checks_ok) {
        rec.outcome = JobOutcome::CheckRejected;
      } else {
        stage = Stage::ChecksPassed;
        std::optional<ComponentStats> stats;
        bool pass = true;
        if (cfg.low_level_check) {
          const Image loaded = source_pixels ? Image{} : gateway.store().load(source.image);
          const Image& before = source_pixels ? *source_pixels : loaded;
          auto g = low_level_check(before, edited.value.pixels, gate);
          stats = g.stats;
          pass = g.verdict == Verdict::Pass;
        }
        if (!pass) {
          rec.outcome = JobOutcome::LowLevelDiscard;
        } else {
          rec.outcome = JobOutcome::Accepted;
          Candidate c;
          c.key = job.key;
          c.ordinal = job.ordinal;
          c.source = source.image;
          c.edited = edited.value.ref;
          c.instruction = job.instruction;
          c.t2i_prompt = source.bundle.t2i_prompt;
          c.category = source.bundle.category;
          c.t2i_seed = source.t2i_seed;
          c.edit_seed = job.seed;
          c.pre_scores = sp;
          c.low_level = stats;
          rec.candidate = std::move(c);
        }
      }
    }
  } catch (const GatewayError& e) {
    cost += to_nano_gpu_hours(e.cost_gpu_hours);
    rec.error = error_name(e);
    rec.outcome = fail_outcome();
  } catch (const std::exception& e) {
    rec.error = dynamic_cast<const DimensionMismatch*>(&e) ? "DimensionMismatch" : "Error";
    rec.outcome = fail_outcome();
  }
  rec.cost_gpu_hours = static_cast<double>(cost) / 1e9;
  return rec;
}

MiningResult run_jobs(const PipelineConfig& cfg, std::vector<SourceImage> sources, ModelGateway& gateway,
                      const MiningOptions& opts) {
  validate(cfg);
  validate(opts.diff_gate);
  MiningResult result;
  result.sources = std::move(sources);
  result.ledger = BudgetLedger(cfg.budget_gpu_hours);

  JobQueue queue = enumerate_jobs(result.sources, cfg.retries_per_instruction, cfg.master_seed, cfg.editor_steps_min,
                                  cfg.editor_steps_max);
  result.counters.jobs_enumerated = queue.size();

  std::map<std::size_t, JobRecord> records;
  const bool checkpointing = !opts.checkpoint_dir.empty();
  const auto ckpt_path = opts.checkpoint_dir / "jobs.jsonl";
  if (checkpointing && opts.resume) {
    for (const auto& j : read_checkpoint(ckpt_path)) {
      auto rec = job_record_from_json(j);
      if (!queue.remove(rec.key)) continue;  // stale entry from a different source set
      result.ledger.charge(rec.cost_gpu_hours);
      ++result.ledger.jobs_executed;
      records[rec.ordinal] = std::move(rec);
    }
  }
  std::unique_ptr<CheckpointFile> ckpt;
  if (checkpointing) {
    std::filesystem::create_directories(opts.checkpoint_dir);
    ckpt = std::make_unique<CheckpointFile>(ckpt_path, opts.resume);
  }

  Rng draw_rng(digest_u64(key_of({"queue", std::to_string(cfg.master_seed)})));
  SourceCache cache(gateway.store(), 16);
  const bool finite = !std::isinf(cfg.budget_gpu_hours);
  const std::int64_t limit_nano = finite ? to_nano_gpu_hours(cfg.budget_gpu_hours) : 0;

  std::mutex mu;
  std::condition_variable cv;
  int in_flight = 0;
  std::int64_t max_job_nano = 0;

  auto worker = [&] {
    for (;;) {
      std::optional<Job> job;
      {
        std::unique_lock lock(mu);
        for (;;) {
          if (queue.empty() || result.ledger.exhausted()) return;
          // With a finite budget, only admit another concurrent job when the
          // in-flight work, priced at the most expensive job seen so far,
          // cannot push spend past the limit.
          if (!finite || in_flight == 0) break;
          if (max_job_nano > 0 && result.ledger.consumed_nano() + (in_flight + 1) * max_job_nano <= limit_nano) break;
          cv.wait(lock);
        }
        job = queue.draw_next(draw_rng);
        ++in_flight;
      }
      const auto& src = result.sources[job->source_index];
      std::shared_ptr<const Image> pixels;
      if (cfg.low_level_check) {
        try {
          pixels = cache.get(src.image);
        } catch (const std::exception&) {
          // Leave it to execute_job, which records the failure.
        }
      }
      auto rec = execute_job(*job, src, cfg, gateway, opts.diff_gate, pixels.get());
      {
        std::lock_guard lock(mu);
        result.ledger.charge(rec.cost_gpu_hours);
        ++result.ledger.jobs_executed;
        max_job_nano = std::max(max_job_nano, to_nano_gpu_hours(rec.cost_gpu_hours));
        --in_flight;
        if (ckpt) ckpt->write(job_record_json(rec));
        records[rec.ordinal] = std::move(rec);
      }
      cv.notify_all();
    }
  };

  if (cfg.max_parallel_jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < cfg.max_parallel_jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  result.ledger.jobs_unsampled = queue.size();
  for (auto& [_, rec] : records) {
    if (rec.candidate) result.pool.push_back(*rec.candidate);
    result.executed.push_back(std::move(rec));
  }
  result.counters = tally(result.executed, result.counters);
  return result;
}

MiningResult run_mining(const PipelineConfig& cfg, const std::vector<PromptBundle>& bundles, ModelGateway& gateway,
                        const MiningOptions& opts) {
  validate(cfg);
  MiningCounters counters;
  double gen_cost = 0;
  auto sources = generate_sources(cfg, bundles, gateway, counters, gen_cost, opts);
  auto result = run_jobs(cfg, std::move(sources), gateway, opts);
  const auto job_counts = result.counters;
  result.counters = counters;
  result.counters.jobs_enumerated = job_counts.jobs_enumerated;
  result.counters.jobs_executed = job_counts.jobs_executed;
  result.counters.edits_generated = job_counts.edits_generated;
  result.counters.pre_filter_pass = job_counts.pre_filter_pass;
  result.counters.bool_check_pass = job_counts.bool_check_pass;
  result.counters.low_level_pass = job_counts.low_level_pass;
  result.counters.failed = job_counts.failed;
  result.counters.score_unavailable = job_counts.score_unavailable;
  result.counters.protocol_violations = job_counts.protocol_violations;
  result.generation_gpu_hours = gen_cost;
  return result;
}

}  // namespace editmine
