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

// Run configuration: one JSON document, overridden field by field.
//
//   {
//     "seeds_per_prompt": 10, "retries_per_instruction": 5,
//     "t_aes": 4.7, "t_adh": 4.7, "t_inv_aes": 4.7, "t_inv_adh": 4.7,
//     "master_seed": 0, "max_parallel_jobs": 1, "budget_gpu_hours": null,
//     "generator_steps": 4, "editor_steps_min": 18, "editor_steps_max": 28,
//     "low_level_check": true,
//     "diff_gate": {"pixel_threshold": 40, "min_component_fraction": 0.005,
//                   "channel_reduction": "max_abs"},
//     "augment": {"max_compositions_per_source": 1, "rewrite_composites": false},
//     "endpoints": {"base_url": "http://127.0.0.1:8080", "timeout_s": 120,
//                   "max_retries": 2, "backoff_ms": 250,
//                   "roles": {"editor": {"base_url": "...", "temperature": 1.0}}},
//     "cost_estimates": {"editor": 0.01},
//     "design_task": null
//   }
//
// A base_url of the form "sim://<seed>" runs the simulated backend in process.

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "editmine/augment.hpp"
#include "editmine/diff_gate.hpp"
#include "editmine/gateway.hpp"
#include "editmine/scheduler.hpp"
#include "json.hpp"

namespace editmine {

struct RunConfig {
  PipelineConfig pipeline;
  DiffGateConfig diff_gate;
  AugmentConfig augment;
  /// One entry per role; base_url may be empty until configured.
  std::map<Role, EndpointConfig> endpoints;
  /// Per-call GPU-hour estimates used by --dry-run.
  std::map<Role, double> cost_estimates;
  /// When set and no prompt file is given, bundles come from the prompt engineer.
  std::optional<std::string> design_task;
  std::string output_dir = "editmine_out";
  bool resume = false;
};

RunConfig default_run_config();

/// Overrides fields present in `j`. Unknown keys are rejected.
void apply_config_json(RunConfig& cfg, const nlohmann::json& j);

/// Every field except output_dir and resume, which describe the invocation
/// rather than the run.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Validates every section and, when `need_endpoints`, that each role has a
/// base URL.
void validate(const RunConfig& cfg, bool need_endpoints);

/// Points every role at `url`.
void set_all_endpoints(RunConfig& cfg, const std::string& url);

/// Builds transports per role (HTTP or in-process simulation) and the gateway.
std::unique_ptr<ModelGateway> make_gateway(const RunConfig& cfg, BlobStore& store, std::shared_ptr<AuditLog> audit);

std::string to_string(ChannelReduction r);
ChannelReduction channel_reduction_from_string(const std::string& s);

}  // namespace editmine
