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

#include "editmine/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace editmine {

using nlohmann::json;

std::string role_name(Role r) {
  switch (r) {
    case Role::PromptEngineer: return "prompt_engineer";
    case Role::Generator: return "generator";
    case Role::Plausibility: return "plausibility";
    case Role::Editor: return "editor";
    case Role::PreValidator: return "pre_validator";
    case Role::HardValidator: return "hard_validator";
    case Role::Inverter: return "inverter";
  }
  return "unknown";
}

Role role_from_name(const std::string& name) {
  for (Role r : kAllRoles) {
    if (role_name(r) == name) return r;
  }
  throw ValidationError("unknown endpoint role: " + name);
}

void validate(const EndpointConfig& cfg) {
  if (!(cfg.timeout_s > 0)) throw ValidationError(role_name(cfg.role) + ": timeout must be positive");
  if (cfg.max_retries < 0) throw ValidationError(role_name(cfg.role) + ": max_retries must be >= 0");
  if (cfg.backoff.count() < 0) throw ValidationError(role_name(cfg.role) + ": backoff must be >= 0");
}

double default_temperature(Role r) {
  switch (r) {
    case Role::HardValidator: return 0.0;
    case Role::PreValidator:
    case Role::Plausibility: return 1e-6;
    default: return 1.0;
  }
}

void validate(const GenerationRequest& req) {
  if (trim(req.prompt).empty()) throw ValidationError("generation prompt is empty");
  if (req.width <= 0 || req.height <= 0 || req.width % 64 != 0 || req.height % 64 != 0) {
    throw ValidationError("generation dims must be positive multiples of 64");
  }
  const int long_side = std::max(req.width, req.height);
  if (long_side < 860 || long_side > 2200) throw ValidationError("generation long side outside [860, 2200]");
  const double ar = static_cast<double>(req.width) / req.height;
  if (ar < 1.0 / kMaxAspect || ar > kMaxAspect) throw ValidationError("generation aspect ratio outside [1/6, 6]");
  if (req.steps < 1) throw ValidationError("generation steps must be >= 1");
}

Resolution snap_resolution(int long_side, double aspect) {
  if (!(aspect > 0) || !std::isfinite(aspect)) throw std::invalid_argument("aspect must be positive");
  aspect = std::clamp(aspect, 1.0 / kMaxAspect, kMaxAspect);
  int L = static_cast<int>(std::lround(long_side / 64.0)) * 64;
  L = std::clamp(L, kMinLongSide, kMaxLongSide);
  const double ratio = std::max(aspect, 1.0 / aspect);
  int S = static_cast<int>(std::lround(L / ratio / 64.0)) * 64;
  // Smallest short side that keeps L / S <= 6.
  const int min_short = static_cast<int>(std::ceil(L / kMaxAspect / 64.0)) * 64;
  S = std::clamp(S, min_short, L);
  return aspect >= 1.0 ? Resolution{L, S} : Resolution{S, L};
}

Resolution sample_resolution(Rng& rng) {
  constexpr int kSteps = (kMaxLongSide - kMinLongSide) / 64;
  const int long_side = kMinLongSide + 64 * static_cast<int>(uniform_below(rng, kSteps + 1));
  const double log_max = std::log(kMaxAspect);
  const double aspect = std::exp(-log_max + 2.0 * log_max * uniform_unit(rng));
  return snap_resolution(long_side, aspect);
}

std::optional<ScorePair> parse_score_text(const std::string& text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  const json doc = json::parse(text.substr(open, close - open + 1), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  auto number = [&](const char* key) -> std::optional<double> {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_number()) return std::nullopt;
    const double v = it->get<double>();
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  };
  const auto adh = number("InstructionAdherence");
  const auto aes = number("ImageAesthetic");
  if (!adh || !aes) return std::nullopt;
  ScorePair p;
  p.adherence = std::clamp(*adh, 1.0, 5.0);
  p.aesthetic = std::clamp(*aes, 1.0, 5.0);
  if (p.adherence != *adh || p.aesthetic != *aes) p.clamped = ScoreDiagnostics{*aes, *adh};
  return p;
}

std::optional<bool> normalize_yes_no(const std::string& text) {
  std::string s = to_lower(trim(text));
  while (!s.empty() && std::ispunct(static_cast<unsigned char>(s.back()))) s.pop_back();
  if (s == "yes") return true;
  if (s == "no") return false;
  return std::nullopt;
}

bool contains_banned_inversion_word(const std::string& text) {
  static const std::set<std::string> kBanned = {"revert", "undo", "restore", "back"};
  std::string word;
  auto flush = [&]() {
    const bool hit = kBanned.count(to_lower(word)) > 0;
    word.clear();
    return hit;
  };
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word.push_back(c);
    } else if (flush()) {
      return true;
    }
  }
  return flush();
}

// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string base_url) : base_url_(std::move(base_url)) {}

WireResponse HttpTransport::post(const std::string& path, const std::string& body, std::chrono::milliseconds timeout) {
  httplib::Client cli(base_url_);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  auto res = cli.Post(path, body, "application/json");
  if (!res) throw std::runtime_error("http " + base_url_ + path + ": " + httplib::to_string(res.error()));
  return WireResponse{res->status, res->body};
}

// ---------------------------------------------------------------------------

JsonlAuditLog::JsonlAuditLog(const std::string& path, bool append) {
  file_ = std::fopen(path.c_str(), append ? "ab" : "wb");
  if (!file_) throw std::runtime_error("cannot open audit log " + path);
}

JsonlAuditLog::~JsonlAuditLog() {
  if (file_) std::fclose(file_);
}

void JsonlAuditLog::record(const AuditEntry& e) {
  std::lock_guard lock(mu_);
  json line = {{"seq", seq_++},
               {"role", e.role},
               {"path", e.path},
               {"request_digest", e.request_digest},
               {"attempt", e.attempt},
               {"status", e.status},
               {"response_digest", e.response_digest},
               {"cost_gpu_hours", e.cost_gpu_hours},
               {"outcome", e.outcome}};
  const auto s = line.dump() + "\n";
  std::fwrite(s.data(), 1, s.size(), file_);
  std::fflush(file_);
}

void MemoryAuditLog::record(const AuditEntry& e) {
  std::lock_guard lock(mu_);
  entries_.push_back(e);
}

std::vector<AuditEntry> MemoryAuditLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

// ---------------------------------------------------------------------------

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.score =
      "Compare the original and the edited image for the edit instruction '{instruction}'. "
      "Score instruction adherence and image aesthetic from 1.0 to 5.0. "
      "Reply with JSON only: {\"InstructionAdherence\": <score>, \"ImageAesthetic\": <score>}";
  t.plausibility = "Is this a realistic, plausible image of: '{prompt}'? Reply Yes or No.";
  t.unwanted_modifications =
      "The edited image should apply '{instruction}' to the original and change nothing else. "
      "Does it? Reply with one word, yes or no.";
  t.aesthetics = "Is this image visually pleasing? Reply with one word, yes or no.";
  t.inversion =
      "Scene: \"{description}\". Applied edit: \"{instruction}\". Write a single short instruction that "
      "turns the edited image into the original, naming only the changed objects with colour, size and "
      "position. Output the instruction only and avoid the words revert, undo, restore and back.";
  t.composite_rewrite =
      "Rewrite these edit steps as one instruction with the same meaning: \"{instruction}\". "
      "Output the instruction only.";
  return t;
}

std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string::npos) {
        auto it = vars.find(tmpl.substr(i + 1, close - i - 1));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

// ---------------------------------------------------------------------------

ModelGateway::ModelGateway(std::map<Role, GatewayEndpoint> endpoints, BlobStore& store,
                           std::shared_ptr<AuditLog> audit, PromptTemplates templates)
    : endpoints_(std::move(endpoints)), store_(store), audit_(std::move(audit)), templates_(std::move(templates)) {
  for (const auto& [role, ep] : endpoints_) {
    validate(ep.config);
    if (!ep.transport) throw ValidationError(role_name(role) + ": no transport");
  }
}

ModelGateway ModelGateway::uniform(std::shared_ptr<Transport> transport, BlobStore& store,
                                   std::shared_ptr<AuditLog> audit, int max_retries,
                                   std::chrono::milliseconds backoff) {
  std::map<Role, GatewayEndpoint> eps;
  for (Role r : kAllRoles) {
    EndpointConfig cfg;
    cfg.role = r;
    cfg.max_retries = max_retries;
    cfg.backoff = backoff;
    cfg.temperature = default_temperature(r);
    eps[r] = GatewayEndpoint{cfg, transport};
  }
  return ModelGateway(std::move(eps), store, std::move(audit));
}

const GatewayEndpoint& ModelGateway::endpoint(Role r) const {
  auto it = endpoints_.find(r);
  if (it == endpoints_.end()) throw ValidationError("endpoint not configured: " + role_name(r));
  return it->second;
}

void ModelGateway::audit(Role role, const std::string& path, const std::string& req_digest, int attempt, int status,
                         const std::string& body, double cost, const std::string& outcome) {
  if (!audit_) return;
  audit_->record(AuditEntry{role_name(role), path, req_digest, attempt, status,
                            body.empty() ? std::string() : sha256_hex(body), cost, outcome});
}

ModelGateway::Envelope ModelGateway::call(Role role, const std::string& path, const std::string& request_body,
                                          const Classifier& classify) {
  const auto& ep = endpoint(role);
  const auto digest = sha256_hex(path + "\n" + request_body);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(ep.config.timeout_s * 1000.0));
  std::string last_error = "no attempt made";
  auto delay = ep.config.backoff;
  for (int attempt = 0; attempt <= ep.config.max_retries; ++attempt) {
    if (attempt > 0 && delay.count() > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    ++requests_;
    WireResponse resp;
    try {
      resp = ep.transport->post(path, request_body, timeout);
    } catch (const std::exception& e) {
      last_error = e.what();
      audit(role, path, digest, attempt, 0, "", 0, "transport_error");
      continue;
    }
    if (resp.status == 429 || resp.status >= 500) {
      last_error = "HTTP " + std::to_string(resp.status) + " from " + path;
      audit(role, path, digest, attempt, resp.status, resp.body, 0, "retryable_status");
      continue;
    }

    Envelope env;
    std::string problem;
    const json doc = json::parse(resp.body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      problem = "response is not a JSON object";
    } else {
      auto c = doc.find("cost_gpu_hours");
      if (c == doc.end() || !c->is_number() || !std::isfinite(c->get<double>()) || c->get<double>() < 0) {
        problem = "missing or invalid cost_gpu_hours";
      } else {
        env.cost = c->get<double>();
      }
      if (auto t = doc.find("text"); t != doc.end() && t->is_string()) env.text = t->get<std::string>();
      if (auto im = doc.find("image"); im != doc.end() && im->is_string()) env.image_b64 = im->get<std::string>();
    }
    if (problem.empty() && (resp.status < 200 || resp.status >= 300)) {
      problem = "HTTP " + std::to_string(resp.status);
    }
    if (!problem.empty()) {
      audit(role, path, digest, attempt, resp.status, resp.body, env.cost, "malformed_envelope");
      throw ProtocolViolation(role_name(role) + ": " + problem, env.cost, resp.body);
    }
    audit(role, path, digest, attempt, resp.status, resp.body, env.cost, classify(env));
    return env;
  }
  throw TransportError(role_name(role) + ": " + last_error, 0.0);
}

namespace {

std::string b64_of(const std::vector<std::uint8_t>& png) { return base64_encode(png); }

// Decodes an image field; returns an empty outcome string on success.
std::string decode_into(const std::string& b64, std::vector<std::uint8_t>& png, std::optional<Image>& out) {
  if (b64.empty()) return "missing_image";
  try {
    png = base64_decode(b64);
    out = decode_png(png);
  } catch (const std::exception&) {
    return "bad_image";
  }
  return "";
}

}  // namespace

Charged<std::vector<PromptBundle>> ModelGateway::design_samples(const std::string& task_payload) {
  const auto& ep = endpoint(Role::PromptEngineer);
  json req = {{"task", task_payload}, {"temperature", ep.config.temperature}};
  auto env = call(Role::PromptEngineer, "/design", req.dump(), [](const Envelope& e) {
    try {
      parse_bundles(e.text);
      return std::string("ok");
    } catch (const ValidationError&) {
      return std::string("design_parse_error");
    }
  });
  try {
    return {parse_bundles(env.text), env.cost};
  } catch (const ValidationError& e) {
    throw DesignParseError(std::string("prompt engineer reply: ") + e.what(), env.cost, env.text);
  }
}

Charged<ImageRef> ModelGateway::generate(const GenerationRequest& r) {
  validate(r);
  json req = {{"prompt", r.prompt}, {"seed", r.seed}, {"width", r.width}, {"height", r.height}, {"steps", r.steps}};
  std::vector<std::uint8_t> png;
  std::optional<Image> img;
  auto env = call(Role::Generator, "/generate", req.dump(), [&](const Envelope& e) {
    auto bad = decode_into(e.image_b64, png, img);
    if (!bad.empty()) return bad;
    if (img->width != r.width || img->height != r.height) return std::string("dimension_mismatch");
    return std::string("ok");
  });
  if (!img) throw ProtocolViolation("generator returned no decodable image", env.cost, "");
  if (img->width != r.width || img->height != r.height) {
    throw ImageDimensionMismatch("generator returned " + std::to_string(img->width) + "x" +
                                     std::to_string(img->height) + ", requested " + std::to_string(r.width) + "x" +
                                     std::to_string(r.height),
                                 env.cost);
  }
  return {store_.put_png(png, *img), env.cost};
}

Charged<bool> ModelGateway::yes_no(Role role, const std::string& path, const std::string& request_body) {
  auto env = call(role, path, request_body, [](const Envelope& e) {
    return normalize_yes_no(e.text) ? std::string("ok") : std::string("protocol_violation");
  });
  const auto v = normalize_yes_no(env.text);
  if (!v) throw ProtocolViolation(role_name(role) + ": expected yes/no, got '" + env.text + "'", env.cost, env.text);
  return {*v, env.cost};
}

Charged<bool> ModelGateway::check_plausibility(const ImageRef& image, const std::string& prompt) {
  const auto& ep = endpoint(Role::Plausibility);
  json req = {{"kind", "plausibility"},
              {"prompt", render_template(templates_.plausibility, {{"prompt", prompt}})},
              {"image", b64_of(store_.read_png(image))},
              {"description", prompt},
              {"temperature", ep.config.temperature}};
  return yes_no(Role::Plausibility, "/check", req.dump());
}

Charged<bool> ModelGateway::check_bool(BoolCheck kind, const ImageRef& before, const std::string& instruction,
                                       const ImageRef& after) {
  const auto& ep = endpoint(Role::PreValidator);
  json req;
  if (kind == BoolCheck::UnwantedModifications) {
    req = {{"kind", "unwanted_modifications"},
           {"prompt", render_template(templates_.unwanted_modifications, {{"instruction", instruction}})},
           {"source_image", b64_of(store_.read_png(before))},
           {"edited_image", b64_of(store_.read_png(after))},
           {"instruction", instruction},
           {"temperature", ep.config.temperature}};
  } else {
    req = {{"kind", "aesthetics"},
           {"prompt", templates_.aesthetics},
           {"image", b64_of(store_.read_png(after))},
           {"temperature", ep.config.temperature}};
  }
  return yes_no(Role::PreValidator, "/check", req.dump());
}

Charged<EditResult> ModelGateway::edit(const ImageRef& image, const std::string& instruction, std::uint64_t seed,
                                       int steps) {
  json req = {{"image", b64_of(store_.read_png(image))}, {"instruction", instruction}, {"seed", seed}, {"steps", steps}};
  std::vector<std::uint8_t> png;
  std::optional<Image> img;
  auto env = call(Role::Editor, "/edit", req.dump(), [&](const Envelope& e) {
    auto bad = decode_into(e.image_b64, png, img);
    if (!bad.empty()) return bad;
    if (img->width != image.width || img->height != image.height) return std::string("dimension_mismatch");
    return std::string("ok");
  });
  if (!img) throw ProtocolViolation("editor returned no decodable image", env.cost, "");
  if (img->width != image.width || img->height != image.height) {
    throw ImageDimensionMismatch("editor changed dimensions from " + std::to_string(image.width) + "x" +
                                     std::to_string(image.height) + " to " + std::to_string(img->width) + "x" +
                                     std::to_string(img->height),
                                 env.cost);
  }
  auto ref = store_.put_png(png, *img);
  return {EditResult{std::move(ref), std::move(*img)}, env.cost};
}

Charged<ScoreResult> ModelGateway::score(const ImageRef& before, const std::string& instruction, const ImageRef& after,
                                         Validator validator) {
  const Role role = validator == Validator::Hard ? Role::HardValidator : Role::PreValidator;
  const auto& ep = endpoint(role);
  json req = {{"validator", validator == Validator::Hard ? "hard" : "pre"},
              {"prompt", render_template(templates_.score, {{"instruction", instruction}})},
              {"source_image", b64_of(store_.read_png(before))},
              {"edited_image", b64_of(store_.read_png(after))},
              {"instruction", instruction},
              {"temperature", ep.config.temperature}};
  const auto body = req.dump();
  double cost = 0;
  std::string last_text;
  // One retry of the identical request on an unparseable reply.
  for (int attempt = 0; attempt < 2; ++attempt) {
    const bool last = attempt == 1;
    auto env = call(role, "/score", body, [&](const Envelope& e) {
      if (parse_score_text(e.text)) return std::string("ok");
      return std::string(last ? "score_unavailable" : "score_unparseable_retrying");
    });
    cost += env.cost;
    if (auto p = parse_score_text(env.text)) return {ScoreResult{*p, env.text}, cost};
    last_text = env.text;
  }
  throw ScoreUnavailable(role_name(role) + ": unparseable score reply", cost, last_text);
}

Charged<std::string> ModelGateway::invert(const std::string& original_description, const std::string& instruction) {
  if (trim(original_description).empty() || trim(instruction).empty()) {
    throw std::invalid_argument("invert: description and instruction must be non-empty");
  }
  const auto& ep = endpoint(Role::Inverter);
  json req = {{"prompt", render_template(templates_.inversion,
                                         {{"description", original_description}, {"instruction", instruction}})},
              {"original_description", original_description},
              {"instruction", instruction},
              {"temperature", ep.config.temperature}};
  auto classify_text = [](const std::string& raw) -> std::string {
    const auto t = trim(raw);
    if (t.empty() || t.find('\n') != std::string::npos) return "protocol_violation";
    if (contains_banned_inversion_word(t)) return "inversion_refused";
    return "ok";
  };
  auto env = call(Role::Inverter, "/invert", req.dump(), [&](const Envelope& e) { return classify_text(e.text); });
  const auto outcome = classify_text(env.text);
  if (outcome == "protocol_violation") {
    throw ProtocolViolation("inverter: expected one non-empty line", env.cost, env.text);
  }
  if (outcome == "inversion_refused") {
    throw InversionRefused("inverter: output uses a banned word", env.cost, env.text);
  }
  return {trim(env.text), env.cost};
}

Charged<std::string> ModelGateway::rewrite_instruction(const std::string& instruction) {
  if (trim(instruction).empty()) throw std::invalid_argument("rewrite_instruction: empty instruction");
  const auto& ep = endpoint(Role::Inverter);
  json req = {{"prompt", render_template(templates_.composite_rewrite, {{"instruction", instruction}})},
              {"instruction", instruction},
              {"temperature", ep.config.temperature}};
  auto one_line = [](const std::string& raw) {
    const auto t = trim(raw);
    return !t.empty() && t.find('\n') == std::string::npos;
  };
  auto env = call(Role::Inverter, "/rewrite", req.dump(),
                  [&](const Envelope& e) { return one_line(e.text) ? "ok" : "protocol_violation"; });
  if (!one_line(env.text)) throw ProtocolViolation("rewrite: expected one non-empty line", env.cost, env.text);
  return {trim(env.text), env.cost};
}

}  // namespace editmine
