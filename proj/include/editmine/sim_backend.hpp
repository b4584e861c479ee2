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

// Deterministic stand-in for every model role.
//
// Each reply is a pure function of (seed, request payload), so repeating a
// request yields byte-identical bytes. The generator paints seeded block noise
// plus a few solid rectangles keyed by the prompt; the editor repaints one
// rectangle keyed by the instruction, a genuinely local change that the diff
// gate can analyse. A configurable share of edits are silent no-ops or
// scattered noise so the low-level check has something to reject.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>

#include "editmine/gateway.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace editmine {

struct SimOptions {
  std::uint64_t seed = 0;
  std::map<Role, double> cost_gpu_hours = {
      {Role::PromptEngineer, 0.0},   {Role::Generator, 0.002},     {Role::Plausibility, 0.0002},
      {Role::Editor, 0.01},          {Role::PreValidator, 0.0005}, {Role::HardValidator, 0.0005},
      {Role::Inverter, 0.0002},
  };
  double plausibility_yes_rate = 0.85;
  double bool_check_yes_rate = 0.9;
  double editor_noop_rate = 0.06;
  double editor_scatter_rate = 0.06;
  /// Scores are 5 - 4 * u^skew for u ~ U[0,1), rounded to one decimal; larger
  /// skew pushes mass towards 5.
  double score_skew = 6.0;
  /// When set, every validator score is this value.
  std::optional<double> forced_score;
  /// When set, every yes/no check answers this.
  std::optional<bool> forced_answer;
  double inverter_refusal_rate = 0.0;
  /// Share of validator/check/inverter replies replaced by a protocol fault:
  /// prose instead of JSON, out-of-range scores, a missing key, or "maybe".
  double fault_rate = 0.0;
  /// Returned verbatim by /design when set.
  std::optional<std::string> canned_design;
  /// Bundles synthesized by /design when no canned reply is set.
  int design_bundle_count = 3;
};

/// Returns the template-based inverse the simulated inverter emits:
/// removal phrasings become "Add ..." and additions become "Remove ...".
std::string sim_inverse_instruction(const std::string& instruction);

class SimBackend {
 public:
  explicit SimBackend(SimOptions opts = {});

  /// Serves one request. Unknown paths give 404, malformed payloads 400.
  WireResponse handle(const std::string& path, const std::string& body);

  const SimOptions& options() const { return opts_; }

 private:
  WireResponse generate(const nlohmann::json& req);
  WireResponse edit(const nlohmann::json& req);
  WireResponse score(const nlohmann::json& req);
  WireResponse check(const nlohmann::json& req);
  WireResponse invert(const nlohmann::json& req);
  WireResponse rewrite(const nlohmann::json& req);
  WireResponse design(const nlohmann::json& req);

  /// Pixel digest of a base64 PNG field; memoized by the field's hash.
  std::string image_id_of(const std::string& b64);
  double unit(std::initializer_list<std::string_view> parts) const;
  std::string text_reply(const std::string& text, Role role) const;

  SimOptions opts_;
  std::mutex cache_mu_;
  std::unordered_map<std::string, std::string> id_cache_;
};

/// Calls a SimBackend directly; the payload still goes through JSON text so
/// behaviour matches the HTTP path.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(std::shared_ptr<SimBackend> backend) : backend_(std::move(backend)) {}
  WireResponse post(const std::string& path, const std::string& body, std::chrono::milliseconds) override {
    return backend_->handle(path, body);
  }

 private:
  std::shared_ptr<SimBackend> backend_;
};

/// Serves a SimBackend over HTTP on 127.0.0.1 (or the given host).
class SimServer {
 public:
  explicit SimServer(std::shared_ptr<SimBackend> backend);
  ~SimServer();
  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);

  /// Binds and serves on the calling thread until stop().
  void serve_blocking(const std::string& host, int port);

  void stop();
  int port() const { return port_; }
  std::string base_url() const;

 private:
  void install_routes();

  std::shared_ptr<SimBackend> backend_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
};

}  // namespace editmine
