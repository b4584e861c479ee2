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

// editmine: mine, augment and evaluate image-editing triplets.

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "editmine/commands.hpp"

using namespace editmine;

namespace {

// Run settings shared by mine and augment. Unset flags leave the config file
// (or the defaults) in charge.
struct RunFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> endpoint;
  std::vector<std::string> role_endpoints;
  std::optional<int> n, m;
  std::optional<double> t_aes, t_adh, t_inv_aes, t_inv_adh;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallel;
  std::optional<double> budget;
  std::optional<int> pixel_threshold;
  std::optional<double> min_fraction;
  std::optional<std::string> reduction;
  bool no_low_level = false;
  std::optional<int> max_compositions;
  bool rewrite_composites = false;
  std::optional<std::string> out;
  bool resume = false;
  std::optional<std::string> design_task;

  void add_to(CLI::App* app, bool mining) {
    app->add_option("--config", config_path, "JSON run configuration file")->check(CLI::ExistingFile);
    app->add_option("--endpoint", endpoint, "Base URL for every model role (sim://<seed> runs in process)");
    app->add_option("--role-endpoint", role_endpoints, "Per-role base URL as role=url (repeatable)");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--parallel", parallel, "Maximum concurrent jobs / requests");
    app->add_option("--t-inv-aes", t_inv_aes, "Backward filter aesthetic threshold");
    app->add_option("--t-inv-adh", t_inv_adh, "Backward filter adherence threshold");
    app->add_option("--max-compositions", max_compositions, "Composed pairs per source (0 = all)");
    app->add_flag("--rewrite-composites", rewrite_composites, "Merge composed instructions into one sentence");
    if (!mining) return;
    app->add_option("-N,--seeds-per-prompt", n, "Source images per prompt");
    app->add_option("-M,--retries", m, "Edit attempts per instruction and source");
    app->add_option("--t-aes", t_aes, "Aesthetic threshold");
    app->add_option("--t-adh", t_adh, "Instruction adherence threshold");
    app->add_option("--budget", budget, "Edit-job budget in GPU hours");
    app->add_option("--pixel-threshold", pixel_threshold, "Diff gate intensity threshold");
    app->add_option("--min-component-fraction", min_fraction, "Diff gate minimum largest-component share");
    app->add_option("--channel-reduction", reduction, "max_abs or luma")
        ->check(CLI::IsMember({"max_abs", "luma"}));
    app->add_flag("--no-low-level-check", no_low_level, "Skip the diff gate");
    app->add_option("-o,--out", out, "Output directory");
    app->add_flag("--resume", resume, "Continue from checkpoints in the output directory");
    app->add_option("--design-task", design_task, "Ask the prompt engineer for bundles instead of a file");
  }

  RunConfig build() const {
    RunConfig cfg = default_run_config();
    if (config_path) {
      const auto doc = nlohmann::json::parse(read_file(*config_path), nullptr, false);
      if (doc.is_discarded()) throw ValidationError(*config_path + ": invalid JSON");
      apply_config_json(cfg, doc);
    }
    auto& p = cfg.pipeline;
    if (endpoint) set_all_endpoints(cfg, *endpoint);
    for (const auto& spec : role_endpoints) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw ValidationError("--role-endpoint expects role=url, got " + spec);
      cfg.endpoints.at(role_from_name(spec.substr(0, eq))).base_url = spec.substr(eq + 1);
    }
    if (n) p.seeds_per_prompt = *n;
    if (m) p.retries_per_instruction = *m;
    if (t_aes) p.t_aes = *t_aes;
    if (t_adh) p.t_adh = *t_adh;
    if (t_inv_aes) p.t_inv_aes = *t_inv_aes;
    if (t_inv_adh) p.t_inv_adh = *t_inv_adh;
    if (seed) p.master_seed = *seed;
    if (parallel) {
      p.max_parallel_jobs = *parallel;
      cfg.augment.max_parallel = *parallel;
    }
    if (budget) p.budget_gpu_hours = *budget;
    if (pixel_threshold) cfg.diff_gate.pixel_threshold = *pixel_threshold;
    if (min_fraction) cfg.diff_gate.min_component_fraction = *min_fraction;
    if (reduction) cfg.diff_gate.reduction = channel_reduction_from_string(*reduction);
    if (no_low_level) p.low_level_check = false;
    if (max_compositions) cfg.augment.max_compositions_per_source = *max_compositions;
    if (rewrite_composites) cfg.augment.rewrite_composites = true;
    if (out) cfg.output_dir = *out;
    if (resume) cfg.resume = true;
    if (design_task) cfg.design_task = *design_task;
    return cfg;
  }
};

int run_guarded(const std::function<int()>& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mine, augment and evaluate image-editing triplets"};
  app.require_subcommand(1);
  int code = kExitOk;

  // mine
  RunFlags mine_flags;
  std::optional<std::string> prompts;
  bool dry_run = false;
  auto* mine = app.add_subcommand("mine", "Generate sources, mine edits, score and select");
  mine->add_option("prompts", prompts, "Prompt bundle JSON file")->check(CLI::ExistingFile);
  mine->add_flag("--dry-run", dry_run, "Print the job count and cost bound without calling any endpoint");
  mine_flags.add_to(mine, true);
  mine->callback([&] {
    code = run_guarded([&] {
      MineOptions o;
      o.config = mine_flags.build();
      o.prompts_path = prompts;
      o.dry_run = dry_run;
      return cmd_mine(o, std::cout, std::cerr);
    });
  });

  // augment
  RunFlags aug_flags;
  std::string dataset_dir;
  auto* augment = app.add_subcommand("augment", "Add inverted and composed triplets to a mined dataset");
  augment->add_option("dataset_dir", dataset_dir, "Directory with dataset.jsonl and blobs/")
      ->required()
      ->check(CLI::ExistingDirectory);
  aug_flags.add_to(augment, false);
  augment->callback([&] {
    code = run_guarded([&] {
      AugmentOptions o;
      o.config = aug_flags.build();
      o.dataset_dir = dataset_dir;
      return cmd_augment(o, std::cout, std::cerr);
    });
  });

  // calibrate
  CalibrateOptions cal;
  std::optional<std::string> predictions, report;
  auto* calibrate = app.add_subcommand("calibrate", "Rater bias, consensus, reliability and validator metrics");
  calibrate->add_option("scores", cal.scores_path, "JSONL of {triplet_id, rater_id, axis, value}")
      ->required()
      ->check(CLI::ExistingFile);
  calibrate->add_option("--predictions", predictions, "JSONL of {triplet_id, adherence, aesthetic}")
      ->check(CLI::ExistingFile);
  calibrate->add_option("--report", report, "Write the JSON report here instead of stdout");
  calibrate->add_option("--threshold", cal.operating_threshold, "Operating threshold for predicted positives")
      ->capture_default_str();
  calibrate->add_option("--baseline", cal.positive_baseline, "Human score above which a triplet is positive")
      ->capture_default_str();
  calibrate->add_option("--bucket-edges", cal.bucket_edges, "Ascending bucket edges")->expected(2, -1);
  calibrate->callback([&] {
    cal.predictions_path = predictions;
    cal.report_path = report;
    code = cmd_calibrate(cal, std::cout, std::cerr);
  });

  // diffgate
  DiffGateOptions dg;
  std::string reduction = "max_abs";
  auto* diffgate = app.add_subcommand("diffgate", "Low-level check of an edited PNG against its source");
  diffgate->add_option("source", dg.a_path, "Source PNG")->required()->check(CLI::ExistingFile);
  diffgate->add_option("edited", dg.b_path, "Edited PNG")->required()->check(CLI::ExistingFile);
  diffgate->add_option("--pixel-threshold", dg.gate.pixel_threshold, "Intensity delta threshold (strict >)")
      ->capture_default_str();
  diffgate->add_option("--min-component-fraction", dg.gate.min_component_fraction,
                       "Discard when the largest component share is below this")
      ->capture_default_str();
  diffgate->add_option("--channel-reduction", reduction, "max_abs or luma")
      ->check(CLI::IsMember({"max_abs", "luma"}))
      ->capture_default_str();
  diffgate->callback([&] {
    dg.gate.reduction = channel_reduction_from_string(reduction);
    code = cmd_diffgate(dg, std::cout, std::cerr);
  });

  // stats
  StatsOptions st;
  std::optional<std::string> stats_dataset, stages;
  std::optional<std::int64_t> attempts;
  auto* stats = app.add_subcommand("stats", "Stage report and dataset distributions");
  stats->add_option("dataset", stats_dataset, "Manifest (dataset.jsonl or augmented.jsonl)")
      ->check(CLI::ExistingFile);
  stats->add_option("--stages", stages, "JSON stage counts to report")->check(CLI::ExistingFile);
  stats->add_option("--attempts", attempts, "Attempt count for the overall survival rate");
  stats->add_flag("--json", st.json_output, "Print JSON");
  stats->callback([&] {
    st.dataset_path = stats_dataset;
    st.stages_path = stages;
    st.attempts = attempts;
    code = cmd_stats(st, std::cout, std::cerr);
  });

  // sim-server
  SimServerOptions sim;
  std::optional<double> forced_score;
  auto* server = app.add_subcommand("sim-server", "Serve the deterministic simulated backend over HTTP");
  server->add_option("--seed", sim.sim.seed, "Simulation seed")->capture_default_str();
  server->add_option("--host", sim.host, "Bind address")->capture_default_str();
  server->add_option("--port", sim.port, "Port (0 picks a free one)")->capture_default_str();
  server->add_option("--fault-rate", sim.sim.fault_rate, "Share of validator replies that are malformed")
      ->check(CLI::Range(0.0, 1.0));
  server->add_option("--refusal-rate", sim.sim.inverter_refusal_rate, "Share of inversions using banned words")
      ->check(CLI::Range(0.0, 1.0));
  server->add_option("--noop-rate", sim.sim.editor_noop_rate, "Share of edits that change nothing")
      ->check(CLI::Range(0.0, 1.0));
  server->add_option("--scatter-rate", sim.sim.editor_scatter_rate, "Share of edits that add scattered noise")
      ->check(CLI::Range(0.0, 1.0));
  server->add_option("--forced-score", forced_score, "Answer every score request with this value");
  server->callback([&] {
    sim.sim.forced_score = forced_score;
    code = cmd_sim_server(sim, std::cout, std::cerr);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  return code;
}
