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

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace editmine {

// Raised when a user-supplied artifact (JSON, manifest, config) fails validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);

/// First 8 bytes of SHA-256(data), big-endian. Used for seed derivation and
/// simulated-backend decisions so results are stable across platforms.
std::uint64_t digest_u64(std::string_view data);

/// Joins parts with a separator that cannot occur in decimal numbers or hex
/// digests, so distinct tuples never collide before hashing.
std::string key_of(std::initializer_list<std::string_view> parts);

/// Deterministic engine. std::mt19937_64's output sequence is fixed by the
/// standard; the distributions below are ours because the standard library's
/// distributions are not reproducible across implementations.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound). bound must be > 0.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

/// Uniform integer in [lo, hi].
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

/// Uniform double in [0, 1) with 53 random bits.
double uniform_unit(Rng& rng);

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Reads a whole file; throws std::runtime_error when it cannot be opened.
std::string read_file(const std::string& path);

/// Writes via a temporary file and rename so readers never see partial output.
void write_file_atomic(const std::string& path, std::string_view content);

/// Calls fn(i) for i in [0, n) on up to `threads` threads. The first exception
/// thrown by fn is rethrown after all threads stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace editmine
