/* Copyright 2026 The isoprobe Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ISOPROBE_CORE_RNG_HPP_
#define ISOPROBE_CORE_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <random>

namespace isoprobe {

// Seeded random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the seed is (seed, stream_id) mixed through
// SplitMix64. Distributions are implemented here rather than taken from
// <random> because the standard leaves their algorithms unspecified.
//
//  - Uniform():      top 53 bits of one draw, scaled to [0, 1).
//  - Gaussian():     Marsaglia polar method; the second variate is cached.
//  - UniformIndex(): rejection sampling over the largest multiple of k.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  // A child stream for sub-task `index`, independent of this stream's state.
  RngStream Derive(std::uint64_t index) const;

  std::uint64_t NextU64() { return engine_(); }
  double Uniform();
  double Gaussian();
  std::size_t UniformIndex(std::size_t k);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t SplitMix64(std::uint64_t x);

}  // namespace isoprobe

#endif  // ISOPROBE_CORE_RNG_HPP_
