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

#include "editmine/config.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "editmine/sim_backend.hpp"

namespace editmine {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ValidationError("unknown config key '" + where + k + "'");
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config key '") + key + "' has the wrong type");
  }
}

void apply_endpoint(EndpointConfig& ep, const json& j, const std::string& where) {
  check_keys(j, {"base_url", "timeout_s", "max_retries", "backoff_ms", "temperature"}, where);
  take(j, "base_url", ep.base_url);
  take(j, "timeout_s", ep.timeout_s);
  take(j, "max_retries", ep.max_retries);
  take(j, "temperature", ep.temperature);
  if (j.contains("backoff_ms")) {
    long long ms = 0;
    take(j, "backoff_ms", ms);
    ep.backoff = std::chrono::milliseconds(ms);
  }
}

}  // namespace

std::string to_string(ChannelReduction r) { return r == ChannelReduction::MaxAbs ? "max_abs" : "luma"; }

ChannelReduction channel_reduction_from_string(const std::string& s) {
  if (s == "max_abs") return ChannelReduction::MaxAbs;
  if (s == "luma") return ChannelReduction::Luma;
  throw ValidationError("channel_reduction must be max_abs or luma");
}

RunConfig default_run_config() {
  RunConfig cfg;
  const SimOptions sim;
  for (Role r : kAllRoles) {
    EndpointConfig ep;
    ep.role = r;
    ep.temperature = default_temperature(r);
    cfg.endpoints[r] = ep;
    cfg.cost_estimates[r] = sim.cost_gpu_hours.at(r);
  }
  return cfg;
}

void apply_config_json(RunConfig& cfg, const json& j) {
  check_keys(j,
             {"seeds_per_prompt", "retries_per_instruction", "t_aes", "t_adh", "t_inv_aes", "t_inv_adh",
              "master_seed", "max_parallel_jobs", "budget_gpu_hours", "generator_steps", "editor_steps_min",
              "editor_steps_max", "low_level_check", "diff_gate", "augment", "endpoints", "cost_estimates",
              "design_task", "output_dir", "resume"},
             "");
  auto& p = cfg.pipeline;
  take(j, "seeds_per_prompt", p.seeds_per_prompt);
  take(j, "retries_per_instruction", p.retries_per_instruction);
  take(j, "t_aes", p.t_aes);
  take(j, "t_adh", p.t_adh);
  take(j, "t_inv_aes", p.t_inv_aes);
  take(j, "t_inv_adh", p.t_inv_adh);
  take(j, "master_seed", p.master_seed);
  take(j, "max_parallel_jobs", p.max_parallel_jobs);
  if (j.contains("budget_gpu_hours")) {
    if (j.at("budget_gpu_hours").is_null()) {
      p.budget_gpu_hours = std::numeric_limits<double>::infinity();
    } else {
      take(j, "budget_gpu_hours", p.budget_gpu_hours);
    }
  }
  take(j, "generator_steps", p.generator_steps);
  take(j, "editor_steps_min", p.editor_steps_min);
  take(j, "editor_steps_max", p.editor_steps_max);
  take(j, "low_level_check", p.low_level_check);
  if (j.contains("diff_gate")) {
    const auto& d = j.at("diff_gate");
    check_keys(d, {"pixel_threshold", "min_component_fraction", "channel_reduction"}, "diff_gate.");
    take(d, "pixel_threshold", cfg.diff_gate.pixel_threshold);
    take(d, "min_component_fraction", cfg.diff_gate.min_component_fraction);
    if (d.contains("channel_reduction")) {
      std::string s;
      take(d, "channel_reduction", s);
      cfg.diff_gate.reduction = channel_reduction_from_string(s);
    }
  }
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    check_keys(a, {"max_compositions_per_source", "rewrite_composites", "max_parallel"}, "augment.");
    take(a, "max_compositions_per_source", cfg.augment.max_compositions_per_source);
    take(a, "rewrite_composites", cfg.augment.rewrite_composites);
    take(a, "max_parallel", cfg.augment.max_parallel);
  }
  if (j.contains("endpoints")) {
    const auto& e = j.at("endpoints");
    check_keys(e, {"base_url", "timeout_s", "max_retries", "backoff_ms", "roles"}, "endpoints.");
    json shared = e;
    shared.erase("roles");
    for (auto& [role, ep] : cfg.endpoints) apply_endpoint(ep, shared, "endpoints.");
    if (e.contains("roles")) {
      if (!e.at("roles").is_object()) throw ValidationError("endpoints.roles must be a JSON object");
      for (const auto& [name, v] : e.at("roles").items()) {
        apply_endpoint(cfg.endpoints.at(role_from_name(name)), v, "endpoints.roles." + name + ".");
      }
    }
  }
  if (j.contains("cost_estimates")) {
    for (const auto& [name, v] : j.at("cost_estimates").items()) {
      const Role r = role_from_name(name);
      if (!v.is_number() || v.get<double>() < 0) throw ValidationError("cost estimate for " + name + " must be >= 0");
      cfg.cost_estimates[r] = v.get<double>();
    }
  }
  if (j.contains("design_task")) {
    if (j.at("design_task").is_null()) {
      cfg.design_task.reset();
    } else {
      std::string t;
      take(j, "design_task", t);
      cfg.design_task = t;
    }
  }
  take(j, "output_dir", cfg.output_dir);
  take(j, "resume", cfg.resume);
}

json config_to_json(const RunConfig& cfg) {
  const auto& p = cfg.pipeline;
  json j;
  j["seeds_per_prompt"] = p.seeds_per_prompt;
  j["retries_per_instruction"] = p.retries_per_instruction;
  j["t_aes"] = p.t_aes;
  j["t_adh"] = p.t_adh;
  j["t_inv_aes"] = p.t_inv_aes;
  j["t_inv_adh"] = p.t_inv_adh;
  j["master_seed"] = p.master_seed;
  j["max_parallel_jobs"] = p.max_parallel_jobs;
  j["budget_gpu_hours"] = std::isinf(p.budget_gpu_hours) ? json(nullptr) : json(p.budget_gpu_hours);
  j["generator_steps"] = p.generator_steps;
  j["editor_steps_min"] = p.editor_steps_min;
  j["editor_steps_max"] = p.editor_steps_max;
  j["low_level_check"] = p.low_level_check;
  j["diff_gate"] = {{"pixel_threshold", cfg.diff_gate.pixel_threshold},
                    {"min_component_fraction", cfg.diff_gate.min_component_fraction},
                    {"channel_reduction", to_string(cfg.diff_gate.reduction)}};
  j["augment"] = {{"max_compositions_per_source", cfg.augment.max_compositions_per_source},
                  {"rewrite_composites", cfg.augment.rewrite_composites},
                  {"max_parallel", cfg.augment.max_parallel}};
  json roles = json::object();
  for (const auto& [r, ep] : cfg.endpoints) {
    roles[role_name(r)] = {{"base_url", ep.base_url},
                           {"timeout_s", ep.timeout_s},
                           {"max_retries", ep.max_retries},
                           {"backoff_ms", ep.backoff.count()},
                           {"temperature", ep.temperature}};
  }
  j["endpoints"] = {{"roles", roles}};
  json costs = json::object();
  for (const auto& [r, c] : cfg.cost_estimates) costs[role_name(r)] = c;
  j["cost_estimates"] = costs;
  j["design_task"] = cfg.design_task ? json(*cfg.design_task) : json(nullptr);
  return j;
}

void validate(const RunConfig& cfg, bool need_endpoints) {
  validate(cfg.pipeline);
  validate(cfg.diff_gate);
  AugmentConfig a = cfg.augment;
  a.t_inv_aes = cfg.pipeline.t_inv_aes;
  a.t_inv_adh = cfg.pipeline.t_inv_adh;
  validate(a);
  for (const auto& [r, ep] : cfg.endpoints) {
    validate(ep);
    if (need_endpoints && ep.base_url.empty()) {
      throw ValidationError("no base_url configured for role " + role_name(r));
    }
  }
}

void set_all_endpoints(RunConfig& cfg, const std::string& url) {
  for (auto& [_, ep] : cfg.endpoints) ep.base_url = url;
}

std::unique_ptr<ModelGateway> make_gateway(const RunConfig& cfg, BlobStore& store, std::shared_ptr<AuditLog> audit) {
  std::map<std::string, std::shared_ptr<Transport>> by_url;
  std::map<Role, GatewayEndpoint> endpoints;
  for (const auto& [r, ep] : cfg.endpoints) {
    auto& t = by_url[ep.base_url];
    if (!t) {
      const std::string sim_prefix = "sim://";
      if (ep.base_url.rfind(sim_prefix, 0) == 0) {
        SimOptions opts;
        try {
          opts.seed = std::stoull(ep.base_url.substr(sim_prefix.size()));
        } catch (const std::exception&) {
          throw ValidationError("sim:// URL needs a numeric seed: " + ep.base_url);
        }
        t = std::make_shared<InProcessTransport>(std::make_shared<SimBackend>(opts));
      } else {
        t = std::make_shared<HttpTransport>(ep.base_url);
      }
    }
    endpoints[r] = GatewayEndpoint{ep, t};
  }
  return std::make_unique<ModelGateway>(std::move(endpoints), store, std::move(audit));
}

}  // namespace editmine
