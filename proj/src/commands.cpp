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

#include "editmine/commands.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

#include "editmine/augment.hpp"
#include "editmine/calibration.hpp"
#include "editmine/image.hpp"

namespace editmine {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ManifestError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<json> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError(path + ":" + std::to_string(n) + ": not a JSON object");
    rows.push_back(std::move(j));
  }
  return rows;
}

json ledger_json(const BudgetLedger& l) {
  return {{"limit_gpu_hours", std::isinf(l.limit_gpu_hours()) ? json(nullptr) : json(l.limit_gpu_hours())},
          {"consumed_nano_gpu_hours", l.consumed_nano()},
          {"jobs_executed", l.jobs_executed},
          {"jobs_unsampled", l.jobs_unsampled}};
}

void write_report(const fs::path& base, const StageReport& report, const json& extra) {
  json j = stage_report_json(report);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_file_atomic(base.string() + ".json", j.dump(2) + "\n");
  write_file_atomic(base.string() + ".txt", stage_report_text(report));
}

}  // namespace

std::vector<StageRow> mine_stage_rows(const MiningCounters& c, std::int64_t quality_pass, std::int64_t selected) {
  const auto n = [](std::uint64_t v) { return static_cast<std::int64_t>(v); };
  return {
      {"Initial Generation", "text-to-image", n(c.sources_generated)},
      {"Generation Filtering", "plausibility check", n(c.sources_plausible)},
      {"Editing Generation", "instruction edit", n(c.edits_generated)},
      {"Editing Filtering", "pre-score + yes/no checks", n(c.bool_check_pass)},
      {"Low Level Check", "diff components", n(c.low_level_pass)},
      {"Quality Scoring", "hard validator", quality_pass},
      {"Final Selection", "argmax selection", selected},
  };
}

std::vector<StageRow> augment_stage_rows(std::int64_t forward, std::int64_t after_inversion,
                                         std::int64_t after_composition, std::int64_t after_filter) {
  return {
      {"Final Selection", "argmax selection", forward},
      {"Inversion", "inverse instructions", after_inversion},
      {"Composition", "bootstrap and concatenation", after_composition},
      {"Backward Consistency Filtering", "hard validator", after_filter},
  };
}

std::vector<PromptBundle> load_bundles(const std::string& path) {
  std::string raw;
  try {
    raw = read_file(path);
  } catch (const std::exception& e) {
    throw ValidationError(e.what());
  }
  auto bundles = parse_bundles(raw);
  for (auto& b : bundles) b = mark_composites(std::move(b));
  return bundles;
}

DryRunEstimate estimate_run(const RunConfig& cfg, const std::vector<PromptBundle>& bundles) {
  DryRunEstimate e;
  const auto& p = cfg.pipeline;
  const auto cost = [&](Role r) { return cfg.cost_estimates.count(r) ? cfg.cost_estimates.at(r) : 0.0; };
  for (const auto& b : bundles) {
    e.sources += static_cast<std::uint64_t>(p.seeds_per_prompt);
    e.jobs += static_cast<std::uint64_t>(p.seeds_per_prompt) * b.edits.size() *
              static_cast<std::uint64_t>(p.retries_per_instruction);
  }
  // Upper bound: every source is plausible and every job reaches hard scoring.
  const double per_source = cost(Role::Generator) + cost(Role::Plausibility);
  const double per_job = cost(Role::Editor) + 3 * cost(Role::PreValidator) + cost(Role::HardValidator);
  e.max_gpu_hours = static_cast<double>(e.sources) * per_source + static_cast<double>(e.jobs) * per_job;
  return e;
}

int cmd_mine(const MineOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig& cfg = opts.config;
    validate(cfg, !opts.dry_run);
    if (!opts.prompts_path && !cfg.design_task) throw ValidationError("mine needs a prompts file or a design_task");

    if (opts.dry_run) {
      if (!opts.prompts_path) throw ValidationError("--dry-run needs a prompts file");
      const auto bundles = load_bundles(*opts.prompts_path);
      const auto e = estimate_run(cfg, bundles);
      out << json{{"bundles", bundles.size()},
                  {"sources", e.sources},
                  {"jobs", e.jobs},
                  {"estimated_max_gpu_hours", e.max_gpu_hours}}
                 .dump(2)
          << "\n";
      return kExitOk;
    }

    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    BlobStore store(dir / "blobs");
    auto audit = std::make_shared<JsonlAuditLog>((dir / "audit.jsonl").string(), cfg.resume);
    auto gateway = make_gateway(cfg, store, audit);

    std::vector<PromptBundle> bundles;
    double design_cost = 0;
    if (opts.prompts_path) {
      bundles = load_bundles(*opts.prompts_path);
    } else {
      auto designed = gateway->design_samples(*cfg.design_task);
      design_cost = designed.cost_gpu_hours;
      bundles = std::move(designed.value);
      for (auto& b : bundles) b = mark_composites(std::move(b));
      write_file_atomic((dir / "prompts.json").string(), serialize_bundles(bundles));
    }

    MiningOptions mopts;
    mopts.diff_gate = cfg.diff_gate;
    mopts.checkpoint_dir = dir / "checkpoint";
    mopts.resume = cfg.resume;
    auto mined = run_mining(cfg.pipeline, bundles, *gateway, mopts);

    HardScoreStats hs;
    const auto scored = hard_score_pool(mined.pool, *gateway, hs, cfg.pipeline.max_parallel_jobs);
    std::vector<CandidateGroup> kept;
    std::int64_t quality_pass = 0;
    for (const auto& g : group_candidates(scored)) {
      auto f = filter_thresholds(g, cfg.pipeline.t_aes, cfg.pipeline.t_adh);
      quality_pass += static_cast<std::int64_t>(f.candidates.size());
      kept.push_back(std::move(f));
    }
    const auto dataset = build_dataset(kept);
    write_manifest((dir / "dataset.jsonl").string(), dataset);

    StageReport report{mine_stage_rows(mined.counters, quality_pass, static_cast<std::int64_t>(dataset.size())),
                       std::nullopt};
    write_report(dir / "stage_report", report, json::object());

    json bundle_ids = json::array();
    for (const auto& b : bundles) bundle_ids.push_back(b.bundle_id);
    json manifest = {
        {"config", config_to_json(cfg)},
        {"bundles", bundle_ids},
        {"counters", counters_json(mined.counters)},
        {"ledger", ledger_json(mined.ledger)},
        {"generation_nano_gpu_hours", to_nano_gpu_hours(mined.generation_gpu_hours)},
        {"design_nano_gpu_hours", to_nano_gpu_hours(design_cost)},
        {"hard_scoring",
         {{"scored", hs.scored},
          {"score_unavailable", hs.score_unavailable},
          {"failed", hs.failed},
          {"nano_gpu_hours", to_nano_gpu_hours(hs.cost_gpu_hours)}}},
        {"quality_pass", quality_pass},
        {"dataset_records", dataset.size()},
    };
    write_file_atomic((dir / "run.json").string(), manifest.dump(2) + "\n");

    out << stage_report_text(report);
    out << fmt::format("dataset: {} records in {}\n", dataset.size(), (dir / "dataset.jsonl").string());
    return kExitOk;
  });
}

int cmd_augment(const AugmentOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig& cfg = opts.config;
    validate(cfg, true);
    const fs::path dir(opts.dataset_dir);
    BlobStore store(dir / "blobs");
    LoadOptions lopts;
    lopts.store = &store;
    const auto ds = load_manifest((dir / "dataset.jsonl").string(), lopts);

    auto audit = std::make_shared<JsonlAuditLog>((dir / "augment_audit.jsonl").string(), false);
    auto gateway = make_gateway(cfg, store, audit);
    AugmentConfig acfg = cfg.augment;
    acfg.seed = cfg.pipeline.master_seed;
    acfg.t_inv_aes = cfg.pipeline.t_inv_aes;
    acfg.t_inv_adh = cfg.pipeline.t_inv_adh;
    validate(acfg);

    AugmentStats stats;
    std::int64_t forward = 0;
    for (const auto& r : ds) forward += r.derivation.kind == DerivationKind::Forward;
    Dataset work = ds;
    auto inverted = apply_inversions(work, *gateway, stats, acfg.max_parallel);
    work.insert(work.end(), inverted.begin(), inverted.end());
    const auto after_inversion = static_cast<std::int64_t>(work.size());
    auto composed = apply_bootstraps(work, acfg, stats, gateway.get());
    work.insert(work.end(), composed.begin(), composed.end());
    const auto after_composition = static_cast<std::int64_t>(work.size());
    work = backward_consistency_filter(work, *gateway, acfg.t_inv_aes, acfg.t_inv_adh, stats, acfg.max_parallel);

    write_manifest((dir / "augmented.jsonl").string(), work);
    StageReport report{augment_stage_rows(forward, after_inversion, after_composition,
                                          static_cast<std::int64_t>(work.size())),
                       std::nullopt};
    write_report(dir / "augment_report", report, {{"augment", augment_stats_json(stats)}});
    out << stage_report_text(report);
    out << fmt::format("augmented: {} records in {}\n", work.size(), (dir / "augmented.jsonl").string());
    return kExitOk;
  });
}

int cmd_calibrate(const CalibrateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<RaterScore> scores;
    for (const auto& row : read_jsonl(opts.scores_path)) {
      try {
        scores.push_back({row.at("triplet_id").get<std::string>(), row.at("rater_id").get<std::string>(),
                          axis_from_string(row.at("axis").get<std::string>()), row.at("value").get<double>()});
      } catch (const json::exception& e) {
        throw ValidationError(std::string("bad score row: ") + e.what());
      }
    }
    validate_scores(scores);

    json report = json::object();
    std::map<Axis, std::map<std::string, double>> consensus_by_axis;
    for (Axis axis : {Axis::Instruction, Axis::Aesthetics}) {
      const auto biases = rater_bias(scores, axis);
      const auto cons = consensus(scores, biases, axis);
      const auto rel = inter_rater_reliability(scores, axis);
      json jb = json::object(), jc = json::object();
      for (const auto& b : biases) jb[b.rater_id] = b.bias;
      for (const auto& c : cons) {
        jc[c.triplet_id] = c.score;
        consensus_by_axis[axis][c.triplet_id] = c.score;
      }
      report[to_string(axis)] = {{"rater_bias", jb},
                                 {"consensus", jc},
                                 {"reliability",
                                  {{"mean_spearman", nullable(rel.mean)},
                                   {"std_spearman", nullable(rel.stddev)},
                                   {"rater_pairs", rel.pairs}}}};
    }

    if (opts.predictions_path) {
      std::vector<AxisPair> pred, truth;
      std::map<Axis, std::pair<std::vector<double>, std::vector<double>>> per_axis;
      for (const auto& row : read_jsonl(*opts.predictions_path)) {
        const auto id = row.at("triplet_id").get<std::string>();
        const auto& ci = consensus_by_axis[Axis::Instruction];
        const auto& ca = consensus_by_axis[Axis::Aesthetics];
        if (!ci.count(id) || !ca.count(id)) continue;  // no human consensus on both axes
        AxisPair p{row.at("adherence").get<double>(), row.at("aesthetic").get<double>()};
        AxisPair t{ci.at(id), ca.at(id)};
        pred.push_back(p);
        truth.push_back(t);
        per_axis[Axis::Instruction].first.push_back(p.adherence);
        per_axis[Axis::Instruction].second.push_back(t.adherence);
        per_axis[Axis::Aesthetics].first.push_back(p.aesthetic);
        per_axis[Axis::Aesthetics].second.push_back(t.aesthetic);
      }
      if (pred.empty()) throw ValidationError("no prediction matches a triplet with consensus on both axes");
      json metrics = {{"matched_triplets", pred.size()}};
      for (auto& [axis, v] : per_axis) {
        json buckets = json::array();
        for (const auto& b : bucketed_mae(v.first, v.second, opts.bucket_edges)) {
          buckets.push_back({{"bucket", b.label}, {"count", b.count}, {"mae", nullable(b.mae)}});
        }
        metrics[to_string(axis)] = {
            {"mae", mae(v.first, v.second)},
            {"spearman", v.first.size() >= 2 ? nullable(spearman(v.first, v.second)) : json(nullptr)},
            {"bucketed_mae", buckets},
            {"confusion_matrix", confusion_matrix(v.first, v.second, opts.bucket_edges)}};
      }
      const auto m = classification_metrics(pred, truth, opts.operating_threshold, opts.positive_baseline);
      metrics["classification"] = {{"operating_threshold", opts.operating_threshold},
                                   {"positive_baseline", opts.positive_baseline},
                                   {"tp", m.tp},
                                   {"fp", m.fp},
                                   {"fn", m.fn},
                                   {"tn", m.tn},
                                   {"precision", m.precision},
                                   {"precision_undefined", m.precision_undefined},
                                   {"recall", m.recall},
                                   {"recall_undefined", m.recall_undefined},
                                   {"f1", m.f1},
                                   {"accuracy", m.accuracy}};
      std::vector<double> thresholds;
      for (int t = 30; t <= 50; ++t) thresholds.push_back(t / 10.0);
      json sweep = json::array();
      for (const auto& s : pr_sweep(pred, truth, thresholds, opts.positive_baseline)) {
        sweep.push_back({{"threshold", s.threshold},
                         {"precision", s.precision},
                         {"precision_undefined", s.precision_undefined},
                         {"recall", s.recall}});
      }
      metrics["pr_sweep"] = sweep;
      json labels = json::array();
      for (std::size_t i = 0; i + 1 < opts.bucket_edges.size(); ++i) labels.push_back(bucket_label(i, opts.bucket_edges));
      metrics["bucket_labels"] = labels;
      report["assessor"] = metrics;
    }

    const auto text = report.dump(2) + "\n";
    if (opts.report_path) {
      write_file_atomic(*opts.report_path, text);
      out << "report written to " << *opts.report_path << "\n";
    } else {
      out << text;
    }
    return kExitOk;
  });
}

int cmd_diffgate(const DiffGateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    validate(opts.gate);
    auto load = [](const std::string& path) {
      std::string raw;
      try {
        raw = read_file(path);
      } catch (const std::exception& e) {
        throw ValidationError(e.what());
      }
      try {
        return decode_png({reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()});
      } catch (const std::exception& e) {
        throw ValidationError(path + ": " + e.what());
      }
    };
    const auto a = load(opts.a_path);
    const auto b = load(opts.b_path);
    if (a.width != b.width || a.height != b.height) {
      throw ValidationError(fmt::format("size mismatch: {}x{} vs {}x{}", a.width, a.height, b.width, b.height));
    }
    const auto r = low_level_check(a, b, opts.gate);
    json j = {{"verdict", to_string(r.verdict)},
              {"changed_pixel_count", r.stats.changed_pixel_count},
              {"component_count", r.stats.component_count},
              {"largest_component_size", r.stats.largest_component_size},
              {"largest_component_fraction", r.stats.largest_component_fraction}};
    out << j.dump(2) << "\n";
    return r.verdict == Verdict::Pass ? kExitOk : kExitNegative;
  });
}

int cmd_stats(const StatsOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!opts.dataset_path && !opts.stages_path) throw ValidationError("stats needs a dataset or --stages");
    json result = json::object();
    std::string text;
    if (opts.stages_path) {
      const auto doc = json::parse(read_file(*opts.stages_path), nullptr, false);
      if (doc.is_discarded()) throw ValidationError(*opts.stages_path + ": invalid JSON");
      const json& rows = doc.is_array() ? doc : doc.value("stages", json::array());
      StageReport report;
      for (const auto& r : rows) {
        try {
          report.rows.push_back({r.at("stage").get<std::string>(), r.value("method", ""), r.at("count").get<std::int64_t>()});
        } catch (const json::exception& e) {
          throw ValidationError(std::string("bad stage row: ") + e.what());
        }
        if (report.rows.back().count < 0) throw ValidationError("stage counts must be non-negative");
      }
      if (report.rows.empty()) throw ValidationError("no stages given");
      if (opts.attempts) {
        report.attempts = opts.attempts;
      } else if (doc.is_object() && doc.contains("attempts") && doc.at("attempts").is_number_integer()) {
        report.attempts = doc.at("attempts").get<std::int64_t>();
      }
      result["stage_report"] = stage_report_json(report);
      text += stage_report_text(report);
    }
    if (opts.dataset_path) {
      const auto ds = load_manifest(*opts.dataset_path);
      json dist = json::object();
      for (auto [axis, name] : {std::pair{DistributionAxis::Derivation, "derivation"},
                                std::pair{DistributionAxis::Category, "category"},
                                std::pair{DistributionAxis::AspectRatio, "resolution"}}) {
        const auto h = distribution_report(ds, axis);
        dist[name] = h;
        if (!text.empty()) text += "\n";
        text += fmt::format("{} ({} records)\n", name, ds.size());
        for (const auto& [k, v] : h) text += fmt::format("  {:<24} {:>8}\n", k, v);
      }
      result["records"] = ds.size();
      result["distributions"] = dist;
    }
    out << (opts.json_output ? result.dump(2) + "\n" : text);
    return kExitOk;
  });
}

int cmd_sim_server(const SimServerOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opts.port < 0 || opts.port > 65535) throw ValidationError("port must be in [0, 65535]");
    SimServer server(std::make_shared<SimBackend>(opts.sim));
    server.start(opts.host, opts.port);
    out << "listening on " << server.base_url() << std::endl;
    // Serve until killed.
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
    return kExitOk;
  });
}

}  // namespace editmine
