// Copyright 2026 The FHA Authors.
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

#ifndef FHA_CORE_RNG_HPP_
#define FHA_CORE_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>
#include <random>
#include <string_view>

namespace fha {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-streams from one seed.
inline std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream) {
  return MixSeed(MixSeed(base) ^ MixSeed(stream + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t DeriveSeed(std::uint64_t base, std::string_view tag) {
  // FNV-1a over the tag.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return DeriveSeed(base, h);
}

// Uniform index in [0, n) from a 64-bit engine. Avoids the
// implementation-defined std::uniform_int_distribution so that index
// streams are identical across standard libraries.
inline std::size_t UniformIndex(Rng& rng, std::size_t n) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % n);
}

template <typename T>
void Shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[UniformIndex(rng, i)]);
  }
}

inline std::uint64_t Fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fha

#endif  // FHA_CORE_RNG_HPP_
