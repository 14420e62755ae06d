/*
 * Copyright 2026 The SegX Toolkit Authors.
 *
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

#ifndef SEGX_RNG_H_
#define SEGX_RNG_H_

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace segx {

// SplitMix64 (Steele, Lea, Flood). Used only to expand a 64-bit seed into
// xoshiro state.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t Next();

 private:
  std::uint64_t state_;
};

// xoshiro256** 1.0 (Blackman, Vigna). All stochastic parts of the toolkit
// draw from this generator so runs are reproducible across platforms.
// std::*_distribution is never used: its output is implementation-defined.
class Xoshiro256 {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Xoshiro256(std::uint64_t seed);
  static Xoshiro256 FromState(const State& state);

  std::uint64_t Next();
  // Uniform in [0,1) with 53 bits of precision.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t Below(std::uint64_t bound);

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(Below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  const State& state() const { return s_; }

 private:
  Xoshiro256() = default;
  State s_{};
};

// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream);

}  // namespace segx

#endif  // SEGX_RNG_H_
