// Copyright 2026 The Doorlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DOORLAB_RNG_HPP_
#define DOORLAB_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <string_view>

namespace doorlab {

// All randomness in the project flows through this header. Distributions are
// hand-rolled on top of splitmix64 so that streams are reproducible across
// compilers and standard libraries, not just across runs.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Order-sensitive combine for deriving child seeds from a parent seed plus
// indices (scene index, episode index, variant index, ...).
inline std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9E3779B97F4A7C15ULL + (b << 1)));
}
inline std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return seed_mix(seed_mix(a, b), c);
}
inline std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b,
                              std::uint64_t c, std::uint64_t d) {
  return seed_mix(seed_mix(a, b, c), d);
}

// FNV-1a, used to fold string ids (scene ids, config dumps) into seeds.
inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

// Counter-based sampling: one u64 key -> one sample, no sequential state.
// Used for per-pixel sensor noise so the value of a pixel never depends on
// evaluation order.
inline double hash_uniform(std::uint64_t key) {
  return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

inline double hash_normal(std::uint64_t key) {
  double u1 = hash_uniform(seed_mix(key, 1));
  double u2 = hash_uniform(seed_mix(key, 2));
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925287 * u2);
}

// Sequential generator with the splitmix64 state transition.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller, two draws per sample (no cached spare, so copying the
  // generator state copies the whole stream).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace doorlab

#endif  // DOORLAB_RNG_HPP_
