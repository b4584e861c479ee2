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

// Client layer for the black-box model roles.
//
// Every role speaks JSON over HTTP POST:
//
//   /design    {task, temperature}                                  -> {text}
//   /generate  {prompt, seed, width, height, steps}                 -> {image}
//   /check     {kind, prompt, image | source_image+edited_image,
//               instruction?, temperature}                          -> {text}
//   /edit      {image, instruction, seed, steps}                    -> {image}
//   /score     {validator, prompt, source_image, edited_image,
//               instruction, temperature}                           -> {text}
//   /invert    {prompt, original_description, instruction,
//               temperature}                                        -> {text}
//   /rewrite   {prompt, instruction, temperature}                   -> {text}
//
// Images are base64-encoded 8-bit RGB PNG. Every response envelope carries a
// non-negative "cost_gpu_hours". "text" is the raw model output, interpreted
// client-side so protocol violations are caught here rather than trusted.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "editmine/blob_store.hpp"
#include "editmine/common.hpp"
#include "editmine/image.hpp"
#include "editmine/prompt_io.hpp"

namespace editmine {

enum class Role { PromptEngineer, Generator, Plausibility, Editor, PreValidator, HardValidator, Inverter };

inline constexpr Role kAllRoles[] = {Role::PromptEngineer, Role::Generator,     Role::Plausibility, Role::Editor,
                                     Role::PreValidator,   Role::HardValidator, Role::Inverter};

std::string role_name(Role r);
Role role_from_name(const std::string& name);

struct EndpointConfig {
  Role role = Role::Generator;
  std::string base_url;
  double timeout_s = 120.0;
  int max_retries = 2;
  double temperature = 0.0;
  /// First retry delay; doubles per attempt.
  std::chrono::milliseconds backoff{250};
};

/// Throws ValidationError when timeout <= 0 or max_retries < 0.
void validate(const EndpointConfig& cfg);

/// Temperatures forwarded by default: hard validator 0.0, other Qwen-style
/// validators 1e-6.
double default_temperature(Role r);

struct GenerationRequest {
  std::string prompt;
  std::uint64_t seed = 0;
  int width = 1024;
  int height = 1024;
  int steps = 4;
};

/// Throws ValidationError unless dims are multiples of 64, long side is in
/// [860, 2200] and aspect ratio is in [1/6, 6].
void validate(const GenerationRequest& req);

struct Resolution {
  int width = 0;
  int height = 0;
  bool operator==(const Resolution&) const = default;
};

inline constexpr int kMinLongSide = 896;   // smallest multiple of 64 >= 860
inline constexpr int kMaxLongSide = 2176;  // largest multiple of 64 <= 2200
inline constexpr double kMaxAspect = 6.0;

/// Snaps a long side and aspect ratio (width / height) to 64-multiples that
/// keep the long side in [896, 2176] and the ratio within [1/6, 6].
Resolution snap_resolution(int long_side, double aspect);

/// Draws a long side uniformly over the admissible 64-multiples and a
/// log-uniform aspect ratio in [1/6, 6].
Resolution sample_resolution(Rng& rng);

struct ScoreDiagnostics {
  double raw_aesthetic = 0;
  double raw_adherence = 0;
  bool operator==(const ScoreDiagnostics&) const = default;
};

/// Aesthetic and adherence scores, both in [1, 5]. When ingest had to clamp,
/// `clamped` keeps the values as received.
struct ScorePair {
  double aesthetic = 1.0;
  double adherence = 1.0;
  std::optional<ScoreDiagnostics> clamped;

  bool operator==(const ScorePair&) const = default;
};

/// Parses validator output such as {"InstructionAdherence": 4.3, "ImageAesthetic": 2.8}.
/// Returns nullopt when the text holds no JSON object with both keys numeric
/// and finite. Out-of-range values are clamped and flagged.
std::optional<ScorePair> parse_score_text(const std::string& text);

/// Accepts exactly "yes"/"no" after trimming, case folding and stripping
/// trailing punctuation. Anything else yields nullopt.
std::optional<bool> normalize_yes_no(const std::string& text);

/// Case-insensitive whole-word search for revert/undo/restore/back.
bool contains_banned_inversion_word(const std::string& text);

// Errors. All carry the GPU cost already spent on the failed call.
class GatewayError : public std::runtime_error {
 public:
  GatewayError(const std::string& what, double cost) : std::runtime_error(what), cost_gpu_hours(cost) {}
  double cost_gpu_hours;
};

/// Transport failure or retryable HTTP status that persisted through every retry.
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// The endpoint answered, but not in the contracted shape.
class ProtocolViolation : public GatewayError {
 public:
  ProtocolViolation(const std::string& what, double cost, std::string raw)
      : GatewayError(what, cost), raw_text(std::move(raw)) {}
  std::string raw_text;
};

class ScoreUnavailable : public ProtocolViolation {
 public:
  using ProtocolViolation::ProtocolViolation;
};

class InversionRefused : public ProtocolViolation {
 public:
  using ProtocolViolation::ProtocolViolation;
};

/// The prompt engineer's reply did not parse as bundles; raw_text is the body.
class DesignParseError : public ProtocolViolation {
 public:
  using ProtocolViolation::ProtocolViolation;
};

class ImageDimensionMismatch : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

struct WireResponse {
  int status = 200;
  std::string body;
};

/// Moves one request to an endpoint. Throws std::runtime_error on connection
/// level failure; HTTP errors are returned as statuses.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual WireResponse post(const std::string& path, const std::string& body, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport. A client is created per request so a single
/// instance can be shared across worker threads.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::string base_url);
  WireResponse post(const std::string& path, const std::string& body, std::chrono::milliseconds timeout) override;

 private:
  std::string base_url_;
};

struct AuditEntry {
  std::string role;
  std::string path;
  std::string request_digest;
  int attempt = 0;
  int status = 0;
  std::string response_digest;
  double cost_gpu_hours = 0;
  std::string outcome;
};

/// Append-only audit channel. Implementations serialize writers internally.
class AuditLog {
 public:
  virtual ~AuditLog() = default;
  virtual void record(const AuditEntry& e) = 0;
};

class JsonlAuditLog : public AuditLog {
 public:
  explicit JsonlAuditLog(const std::string& path, bool append = false);
  ~JsonlAuditLog() override;
  JsonlAuditLog(const JsonlAuditLog&) = delete;
  JsonlAuditLog& operator=(const JsonlAuditLog&) = delete;
  void record(const AuditEntry& e) override;

 private:
  std::mutex mu_;
  std::FILE* file_ = nullptr;
  std::uint64_t seq_ = 0;
};

class MemoryAuditLog : public AuditLog {
 public:
  void record(const AuditEntry& e) override;
  std::vector<AuditEntry> entries() const;

 private:
  mutable std::mutex mu_;
  std::vector<AuditEntry> entries_;
};

/// Prompt templates forwarded as the "prompt" field. Placeholders:
/// {instruction}, {prompt}, {description}.
struct PromptTemplates {
  std::string score;
  std::string plausibility;
  std::string unwanted_modifications;
  std::string aesthetics;
  std::string inversion;
  std::string composite_rewrite;

  static PromptTemplates defaults();
};

std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& vars);

template <class T>
struct Charged {
  T value;
  double cost_gpu_hours = 0;
};

enum class Validator { Pre, Hard };
enum class BoolCheck { UnwantedModifications, Aesthetics };

struct ScoreResult {
  ScorePair scores;
  std::string raw_text;
};

struct EditResult {
  ImageRef ref;
  Image pixels;
};

struct GatewayEndpoint {
  EndpointConfig config;
  std::shared_ptr<Transport> transport;
};

class ModelGateway {
 public:
  ModelGateway(std::map<Role, GatewayEndpoint> endpoints, BlobStore& store, std::shared_ptr<AuditLog> audit = nullptr,
               PromptTemplates templates = PromptTemplates::defaults());

  /// Same transport and settings for every role.
  static ModelGateway uniform(std::shared_ptr<Transport> transport, BlobStore& store,
                              std::shared_ptr<AuditLog> audit = nullptr, int max_retries = 2,
                              std::chrono::milliseconds backoff = std::chrono::milliseconds(0));

  Charged<std::vector<PromptBundle>> design_samples(const std::string& task_payload);
  Charged<ImageRef> generate(const GenerationRequest& req);
  Charged<bool> check_plausibility(const ImageRef& image, const std::string& prompt);
  Charged<EditResult> edit(const ImageRef& image, const std::string& instruction, std::uint64_t seed, int steps);
  Charged<ScoreResult> score(const ImageRef& before, const std::string& instruction, const ImageRef& after,
                             Validator validator);
  Charged<bool> check_bool(BoolCheck kind, const ImageRef& before, const std::string& instruction,
                           const ImageRef& after);
  Charged<std::string> invert(const std::string& original_description, const std::string& instruction);
  /// Merges a multi-sentence instruction into one, using the inverter role.
  Charged<std::string> rewrite_instruction(const std::string& instruction);

  /// Total wire requests attempted (every retry counts).
  std::uint64_t request_count() const { return requests_.load(); }

  BlobStore& store() { return store_; }

 private:
  const GatewayEndpoint& endpoint(Role r) const;

  struct Envelope {
    std::string text;
    std::string image_b64;
    double cost = 0;
  };
  using Classifier = std::function<std::string(const Envelope&)>;

  /// Sends with transport-level retries and returns the decoded envelope.
  /// `classify` names the outcome of a delivered envelope for the audit log
  /// ("ok" or the violation about to be raised by the caller).
  Envelope call(Role role, const std::string& path, const std::string& request_body, const Classifier& classify);
  void audit(Role role, const std::string& path, const std::string& req_digest, int attempt, int status,
             const std::string& body, double cost, const std::string& outcome);
  Charged<bool> yes_no(Role role, const std::string& path, const std::string& request_body);

  std::map<Role, GatewayEndpoint> endpoints_;
  BlobStore& store_;
  std::shared_ptr<AuditLog> audit_;
  PromptTemplates templates_;
  std::atomic<std::uint64_t> requests_{0};
};

}  // namespace editmine
