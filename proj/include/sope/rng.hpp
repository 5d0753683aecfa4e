// Copyright 2026 The SOPE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SOPE_RNG_HPP_
#define SOPE_RNG_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace sope {

// Identifier written into run metadata. Streams are reproducible only for
// the same identifier.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64/splitmix64-seed";

// One round of the SplitMix64 finalizer. Used to turn small consecutive
// integers into well separated engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform double in [0, 1) built from the top 53 bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Draws an index from an unnormalized-safe probability vector. Entries
  // with zero probability are never returned.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      last_positive = static_cast<int>(i);
      acc += probs[i];
      if (u < acc) return last_positive;
    }
    return last_positive;
  }

  // Derives an independent child generator.
  Rng split() { return Rng(next()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sope

#endif  // SOPE_RNG_HPP_
