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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace kbc {

// Dense integer id tagged with the vocabulary it indexes.
template <typename Tag>
class StrongId {
 public:
  using value_type = std::uint32_t;

  constexpr StrongId() = default;
  constexpr explicit StrongId(value_type value) : value_(value) {}

  constexpr value_type value() const { return value_; }

  friend constexpr auto operator<=>(StrongId, StrongId) = default;

 private:
  value_type value_ = 0;
};

struct EntityTag;
struct RelationTag;

using EntityId = StrongId<EntityTag>;
// Forward relations occupy [0, R); their inverses occupy [R, 2R).
using RelationId = StrongId<RelationTag>;

struct Triple {
  EntityId head;
  RelationId rel;
  EntityId tail;

  friend constexpr auto operator<=>(const Triple&, const Triple&) = default;
};

// A (head, tail) pair of one relation's pair set.
struct EntityPair {
  EntityId head;
  EntityId tail;

  friend constexpr auto operator<=>(const EntityPair&,
                                    const EntityPair&) = default;
};

inline constexpr RelationId inverse_relation(RelationId rel,
                                             std::size_t num_forward) {
  const auto r = static_cast<std::size_t>(rel.value());
  return RelationId(static_cast<std::uint32_t>(
      r < num_forward ? r + num_forward : r - num_forward));
}

inline constexpr bool is_inverse(RelationId rel, std::size_t num_forward) {
  return rel.value() >= num_forward;
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line,
             const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace kbc

template <typename Tag>
struct std::hash<kbc::StrongId<Tag>> {
  std::size_t operator()(kbc::StrongId<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value());
  }
};

template <>
struct std::hash<kbc::EntityPair> {
  std::size_t operator()(const kbc::EntityPair& p) const noexcept {
    const std::uint64_t packed =
        (static_cast<std::uint64_t>(p.head.value()) << 32) | p.tail.value();
    return std::hash<std::uint64_t>{}(packed);
  }
};
