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

#pragma once

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "editmine/gateway.hpp"
#include "editmine/image.hpp"
#include "json.hpp"

namespace testing_support {

inline std::string data_path(const std::string& name) { return std::string(EDITMINE_TEST_DATA_DIR) + "/" + name; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("editmine_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

/// Transport whose replies come from a handler; records every call.
class ScriptedTransport : public editmine::Transport {
 public:
  using Handler = std::function<editmine::WireResponse(const std::string& path, const nlohmann::json& req)>;
  explicit ScriptedTransport(Handler h) : handler_(std::move(h)) {}

  editmine::WireResponse post(const std::string& path, const std::string& body, std::chrono::milliseconds) override {
    {
      std::lock_guard<std::mutex> lk(mu_);
      calls_.push_back(path);
    }
    return handler_(path, nlohmann::json::parse(body));
  }

  std::vector<std::string> calls() const {
    std::lock_guard<std::mutex> lk(mu_);
    return calls_;
  }

 private:
  Handler handler_;
  mutable std::mutex mu_;
  std::vector<std::string> calls_;
};

inline editmine::WireResponse text_response(const std::string& text, double cost = 0.001) {
  return {200, nlohmann::json{{"text", text}, {"cost_gpu_hours", cost}}.dump()};
}

inline editmine::Image solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  editmine::Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set(x, y, {r, g, b});
  return img;
}

}  // namespace testing_support
