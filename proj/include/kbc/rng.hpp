/*
 * Copyright 2026 The kbc-toolkit Authors.
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
#include <initializer_list>
#include <random>

namespace kbc {

using Rng = std::mt19937_64;

// Independent stream for (master seed, stream coordinates). Used so that
// per-relation and per-step randomness does not depend on scheduling order.
inline Rng derive_rng(std::uint64_t seed,
                      std::initializer_list<std::uint64_t> stream) {
  std::seed_seq::result_type words[16];
  std::size_t n = 0;
  words[n++] = static_cast<std::uint32_t>(seed);
  words[n++] = static_cast<std::uint32_t>(seed >> 32);
  for (std::uint64_t s : stream) {
    if (n + 2 > std::size(words)) break;
    words[n++] = static_cast<std::uint32_t>(s);
    words[n++] = static_cast<std::uint32_t>(s >> 32);
  }
  std::seed_seq seq(words, words + n);
  return Rng(seq);
}

}  // namespace kbc
