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

#include "editmine/sim_backend.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "httplib.h"

namespace editmine {

using nlohmann::json;

namespace {

constexpr int kBlock = 16;

using Rgb = std::array<std::uint8_t, 3>;

Rgb random_color(Rng& rng, int lo, int hi) {
  return {static_cast<std::uint8_t>(uniform_int(rng, lo, hi)), static_cast<std::uint8_t>(uniform_int(rng, lo, hi)),
          static_cast<std::uint8_t>(uniform_int(rng, lo, hi))};
}

void fill_rect(Image& img, int x0, int y0, int w, int h, Rgb c) {
  const int x1 = std::min(img.width, x0 + w), y1 = std::min(img.height, y0 + h);
  for (int y = std::max(0, y0); y < y1; ++y) {
    for (int x = std::max(0, x0); x < x1; ++x) img.set(x, y, c);
  }
}

struct RectSpec {
  int x, y, w, h;
};

// Rectangle of 8-25% (or the given range) of each dimension at a key-derived spot.
RectSpec keyed_rect(Rng& rng, int width, int height, double min_frac, double max_frac) {
  const double fw = min_frac + (max_frac - min_frac) * uniform_unit(rng);
  const double fh = min_frac + (max_frac - min_frac) * uniform_unit(rng);
  const int w = std::max(4, static_cast<int>(fw * width));
  const int h = std::max(4, static_cast<int>(fh * height));
  const int x = static_cast<int>(uniform_unit(rng) * std::max(1, width - w));
  const int y = static_cast<int>(uniform_unit(rng) * std::max(1, height - h));
  return {x, y, w, h};
}

std::string lstrip_ci(const std::string& s, const std::string& prefix, bool& matched) {
  matched = to_lower(s.substr(0, prefix.size())) == prefix;
  return matched ? s.substr(prefix.size()) : s;
}

std::string strip_tail(std::string s) {
  s = trim(s);
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == ',')) s.pop_back();
  for (std::string tail : {", thanks", ", please"}) {
    const auto lower = to_lower(s);
    if (lower.size() > tail.size() && lower.compare(lower.size() - tail.size(), tail.size(), tail) == 0) {
      s.resize(s.size() - tail.size());
    }
  }
  return trim(s);
}

WireResponse bad_request(const std::string& msg) {
  return WireResponse{400, json{{"error", msg}, {"cost_gpu_hours", 0.0}}.dump()};
}

}  // namespace

std::string sim_inverse_instruction(const std::string& instruction) {
  static const char* kRemovals[] = {"remove ", "get rid of ", "eliminate ", "delete ", "erase ",
                                    "lose ",   "take away ",  "take out ",  "no "};
  static const char* kAdditions[] = {"add ", "place ", "put ", "insert "};
  const auto text = trim(instruction);
  for (const char* p : kRemovals) {
    bool m = false;
    auto rest = lstrip_ci(text, p, m);
    if (m) {
      rest = strip_tail(rest);
      bool that = false;
      auto obj = lstrip_ci(rest, "that ", that);
      if (that) obj = "the " + obj;
      return "Add " + obj + ".";
    }
  }
  for (const char* p : kAdditions) {
    bool m = false;
    auto rest = lstrip_ci(text, p, m);
    if (m) return "Remove " + strip_tail(rest) + ".";
  }
  return "Change the image so this edit no longer applies: " + strip_tail(text) + ".";
}

SimBackend::SimBackend(SimOptions opts) : opts_(std::move(opts)) {}

double SimBackend::unit(std::initializer_list<std::string_view> parts) const {
  std::string k = std::to_string(opts_.seed);
  for (auto p : parts) {
    k.push_back('\x1f');
    k.append(p);
  }
  return static_cast<double>(digest_u64(k) >> 11) * 0x1.0p-53;
}

std::string SimBackend::text_reply(const std::string& text, Role role) const {
  auto it = opts_.cost_gpu_hours.find(role);
  return json{{"text", text}, {"cost_gpu_hours", it == opts_.cost_gpu_hours.end() ? 0.0 : it->second}}.dump();
}

std::string SimBackend::image_id_of(const std::string& b64) {
  const auto key = sha256_hex(b64);
  {
    std::lock_guard lock(cache_mu_);
    if (auto it = id_cache_.find(key); it != id_cache_.end()) return it->second;
  }
  const auto png = base64_decode(b64);
  const auto id = image_digest(decode_png(png));
  std::lock_guard lock(cache_mu_);
  if (id_cache_.size() > 100000) id_cache_.clear();
  id_cache_.emplace(key, id);
  return id;
}

WireResponse SimBackend::handle(const std::string& path, const std::string& body) {
  const json req = json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.is_object()) return bad_request("body is not a JSON object");
  try {
    if (path == "/generate") return generate(req);
    if (path == "/edit") return edit(req);
    if (path == "/score") return score(req);
    if (path == "/check") return check(req);
    if (path == "/invert") return invert(req);
    if (path == "/rewrite") return rewrite(req);
    if (path == "/design") return design(req);
  } catch (const json::exception& e) {
    return bad_request(e.what());
  } catch (const std::exception& e) {
    return bad_request(e.what());
  }
  return WireResponse{404, json{{"error", "unknown path " + path}, {"cost_gpu_hours", 0.0}}.dump()};
}

WireResponse SimBackend::generate(const json& req) {
  const auto prompt = req.at("prompt").get<std::string>();
  const auto seed = req.at("seed").get<std::uint64_t>();
  const int w = req.at("width").get<int>(), h = req.at("height").get<int>();
  if (w <= 0 || h <= 0 || w > 8192 || h > 8192) return bad_request("bad dimensions");

  Image img(w, h);
  Rng base_rng(digest_u64(key_of({std::to_string(opts_.seed), "background", prompt})));
  const Rgb base = random_color(base_rng, 60, 195);
  Rng noise(digest_u64(key_of({std::to_string(opts_.seed), "noise", prompt, std::to_string(seed)})));
  for (int by = 0; by < h; by += kBlock) {
    for (int bx = 0; bx < w; bx += kBlock) {
      Rgb c;
      for (int ch = 0; ch < 3; ++ch) c[ch] = static_cast<std::uint8_t>(base[ch] + uniform_int(noise, -12, 12));
      fill_rect(img, bx, by, kBlock, kBlock, c);
    }
  }
  Rng count_rng(digest_u64(key_of({std::to_string(opts_.seed), "rect-count", prompt})));
  const int rects = 3 + static_cast<int>(uniform_below(count_rng, 4));
  for (int r = 0; r < rects; ++r) {
    Rng rr(digest_u64(key_of({std::to_string(opts_.seed), "rect", prompt, std::to_string(r)})));
    auto spec = keyed_rect(rr, w, h, 0.08, 0.25);
    const Rgb color = random_color(rr, 0, 255);
    Rng jitter(digest_u64(key_of({std::to_string(opts_.seed), "jitter", prompt, std::to_string(seed), std::to_string(r)})));
    spec.x += static_cast<int>(uniform_int(jitter, -w / 50, w / 50));
    spec.y += static_cast<int>(uniform_int(jitter, -h / 50, h / 50));
    fill_rect(img, spec.x, spec.y, spec.w, spec.h, color);
  }
  const auto png = encode_png(img);
  json out = {{"image", base64_encode(png)}, {"cost_gpu_hours", opts_.cost_gpu_hours.at(Role::Generator)}};
  return {200, out.dump()};
}

WireResponse SimBackend::edit(const json& req) {
  const auto& b64 = req.at("image").get_ref<const std::string&>();
  const auto instruction = req.at("instruction").get<std::string>();
  const auto seed = std::to_string(req.at("seed").get<std::uint64_t>());
  const double cost = opts_.cost_gpu_hours.at(Role::Editor);
  const auto src_id = image_id_of(b64);

  const double mode = unit({"edit-mode", src_id, instruction, seed});
  if (mode < opts_.editor_noop_rate) {
    return {200, json{{"image", b64}, {"cost_gpu_hours", cost}}.dump()};
  }
  Image img = decode_png(base64_decode(b64));
  if (mode < opts_.editor_noop_rate + opts_.editor_scatter_rate) {
    // Scattered single-pixel noise: no component dominates the change mask.
    Rng rng(digest_u64(key_of({std::to_string(opts_.seed), "scatter", src_id, instruction, seed})));
    const std::size_t n = std::max<std::size_t>(400, img.pixel_count() / 2000);
    for (std::size_t i = 0; i < n; ++i) {
      const int x = static_cast<int>(uniform_below(rng, img.width));
      const int y = static_cast<int>(uniform_below(rng, img.height));
      auto* p = img.at(x, y);
      for (int ch = 0; ch < 3; ++ch) p[ch] = static_cast<std::uint8_t>(p[ch] + 128);
    }
  } else {
    Rng where(digest_u64(key_of({std::to_string(opts_.seed), "edit-rect", instruction})));
    auto spec = keyed_rect(where, img.width, img.height, 0.10, 0.30);
    Rng jitter(digest_u64(key_of({std::to_string(opts_.seed), "edit-jitter", src_id, instruction, seed})));
    spec.x += static_cast<int>(uniform_int(jitter, -img.width / 40, img.width / 40));
    spec.y += static_cast<int>(uniform_int(jitter, -img.height / 40, img.height / 40));
    const bool removal = sim_inverse_instruction(instruction).rfind("Add ", 0) == 0;
    Rgb color;
    if (removal) {
      const auto g = static_cast<std::uint8_t>(uniform_int(where, 20, 235));
      color = {g, g, g};
    } else {
      color = random_color(jitter, 0, 255);
    }
    fill_rect(img, spec.x, spec.y, spec.w, spec.h, color);
  }
  const auto png = encode_png(img);
  return {200, json{{"image", base64_encode(png)}, {"cost_gpu_hours", cost}}.dump()};
}

WireResponse SimBackend::score(const json& req) {
  const auto validator = req.at("validator").get<std::string>();
  if (validator != "pre" && validator != "hard") return bad_request("unknown validator " + validator);
  const Role role = validator == "hard" ? Role::HardValidator : Role::PreValidator;
  const auto src = image_id_of(req.at("source_image").get_ref<const std::string&>());
  const auto edt = image_id_of(req.at("edited_image").get_ref<const std::string&>());
  const auto instruction = req.at("instruction").get<std::string>();

  if (unit({"score-fault", validator, src, edt, instruction}) < opts_.fault_rate) {
    switch (digest_u64(key_of({std::to_string(opts_.seed), "score-fault-kind", validator, src, edt, instruction})) % 3) {
      case 0: return {200, text_reply("The edit looks great overall, I would rate it highly.", role)};
      case 1: return {200, text_reply(R"({"InstructionAdherence": 7.0, "ImageAesthetic": 6.5})", role)};
      default: return {200, text_reply(R"({"InstructionAdherence": 4.9})", role)};
    }
  }
  auto draw = [&](const char* axis) {
    if (opts_.forced_score) return *opts_.forced_score;
    const double u = unit({"score", axis, validator, src, edt, instruction});
    return std::round((5.0 - 4.0 * std::pow(u, opts_.score_skew)) * 10.0) / 10.0;
  };
  const double adh = draw("adherence"), aes = draw("aesthetic");
  return {200, text_reply(fmt::format(R"({{"InstructionAdherence": {:.1f}, "ImageAesthetic": {:.1f}}})", adh, aes),
                          role)};
}

WireResponse SimBackend::check(const json& req) {
  const auto kind = req.at("kind").get<std::string>();
  Role role = Role::PreValidator;
  std::string key;
  if (kind == "plausibility") {
    role = Role::Plausibility;
    key = image_id_of(req.at("image").get_ref<const std::string&>()) + "|" + req.value("description", "");
  } else if (kind == "unwanted_modifications") {
    key = image_id_of(req.at("source_image").get_ref<const std::string&>()) + "|" +
          image_id_of(req.at("edited_image").get_ref<const std::string&>()) + "|" + req.value("instruction", "");
  } else if (kind == "aesthetics") {
    key = image_id_of(req.at("image").get_ref<const std::string&>());
  } else {
    return bad_request("unknown check kind " + kind);
  }
  if (unit({"check-fault", kind, key}) < opts_.fault_rate) return {200, text_reply("maybe", role)};
  bool yes;
  if (opts_.forced_answer) {
    yes = *opts_.forced_answer;
  } else {
    const double rate = role == Role::Plausibility ? opts_.plausibility_yes_rate : opts_.bool_check_yes_rate;
    yes = unit({"check", kind, key}) < rate;
  }
  if (role == Role::Plausibility) return {200, text_reply(yes ? "Yes" : "No", role)};
  return {200, text_reply(yes ? "yes" : "no.", role)};
}

WireResponse SimBackend::invert(const json& req) {
  const auto description = req.at("original_description").get<std::string>();
  const auto instruction = req.at("instruction").get<std::string>();
  if (unit({"invert-fault", description, instruction}) < opts_.fault_rate) {
    return {200, text_reply("Here is the inverse instruction:\nAdd it.", Role::Inverter)};
  }
  if (unit({"invert-refuse", description, instruction}) < opts_.inverter_refusal_rate) {
    return {200, text_reply("Undo the previous edit.", Role::Inverter)};
  }
  return {200, text_reply(sim_inverse_instruction(instruction), Role::Inverter)};
}

// Joins sentences with ", then " and lowercases each joined sentence's first letter.
WireResponse SimBackend::rewrite(const json& req) {
  const auto instruction = trim(req.at("instruction").get<std::string>());
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start < instruction.size()) {
    auto end = instruction.find(". ", start);
    if (end == std::string::npos) end = instruction.size();
    auto piece = trim(instruction.substr(start, end - start));
    while (!piece.empty() && piece.back() == '.') piece.pop_back();
    if (!piece.empty()) parts.push_back(piece);
    start = end + 2;
  }
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto p = parts[i];
    if (i > 0) {
      out += ", then ";
      p[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(p[0])));
    }
    out += p;
  }
  return {200, text_reply(out + ".", Role::Inverter)};
}

WireResponse SimBackend::design(const json& req) {
  if (opts_.canned_design) return {200, text_reply(*opts_.canned_design, Role::PromptEngineer)};
  const auto task = req.value("task", "");
  static const char* kScenes[] = {"sunlit kitchen", "cluttered desk", "quiet living room", "garden patio",
                                  "workshop bench", "hotel lobby",    "café counter",      "children's bedroom"};
  static const char* kObjects[] = {"ceramic mug", "potted fern",  "red backpack",  "desk lamp",   "paper map",
                                   "glass vase",  "wooden chair", "striped towel", "tin lantern", "wicker basket",
                                   "blue kettle", "stack of books"};
  json arr = json::array();
  for (int b = 0; b < opts_.design_bundle_count; ++b) {
    Rng rng(digest_u64(key_of({std::to_string(opts_.seed), "design", task, std::to_string(b)})));
    const std::string scene = kScenes[uniform_below(rng, std::size(kScenes))];
    const int n = 1 + static_cast<int>(uniform_below(rng, 4));
    std::vector<std::string> objs;
    while (static_cast<int>(objs.size()) < n) {
      std::string o = kObjects[uniform_below(rng, std::size(kObjects))];
      if (std::find(objs.begin(), objs.end(), o) == objs.end()) objs.push_back(o);
    }
    std::string prompt = "A " + scene + " with ";
    json edits = json::array();
    for (int i = 0; i < n; ++i) {
      prompt += (i == 0 ? "a " : (i + 1 == n ? " and a " : ", a ")) + objs[i];
      edits.push_back("Remove the " + objs[i] + ".");
    }
    prompt += ".";
    if (n >= 2) {
      std::string all = "Remove the ";
      for (int i = 0; i < n; ++i) all += (i == 0 ? "" : (i + 1 == n ? " and " : ", ")) + objs[i];
      edits.push_back(all + ".");
    }
    arr.push_back({{"prompt", prompt}, {"edits", edits}});
  }
  return {200, text_reply(arr.dump(), Role::PromptEngineer)};
}

// ---------------------------------------------------------------------------

SimServer::SimServer(std::shared_ptr<SimBackend> backend)
    : backend_(std::move(backend)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

SimServer::~SimServer() { stop(); }

void SimServer::install_routes() {
  for (const char* path : {"/design", "/generate", "/check", "/edit", "/score", "/invert", "/rewrite"}) {
    const std::string p(path);
    server_->Post(p, [this, p](const httplib::Request& req, httplib::Response& res) {
      auto r = backend_->handle(p, req.body);
      res.status = r.status;
      res.set_content(r.body, "application/json");
    });
  }
}

int SimServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    if (!server_->bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  if (port_ <= 0) throw std::runtime_error("cannot bind " + host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void SimServer::serve_blocking(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void SimServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string SimServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace editmine
