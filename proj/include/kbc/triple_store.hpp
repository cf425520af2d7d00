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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kbc/types.hpp"

namespace kbc {

// Bijection between surface strings and dense ids, in insertion order.
class Vocabulary {
 public:
  std::uint32_t add(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

enum class Split { kTrain, kValid, kTest };

// Indexed train/valid/test triples over forward relations.
//
// Membership and known-tail queries cover the union of all splits and accept
// inverse relation ids: (h, r + R, t) is known iff (t, r, h) is. Immutable
// after construction.
class TripleStore {
 public:
  TripleStore(Vocabulary entities, Vocabulary relations,
              std::vector<Triple> train, std::vector<Triple> valid,
              std::vector<Triple> test);

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  std::size_t num_entities() const { return entities_.size(); }
  // Number of forward relations R.
  std::size_t num_relations() const { return relations_.size(); }

  const std::vector<Triple>& train() const { return train_; }
  const std::vector<Triple>& valid() const { return valid_; }
  const std::vector<Triple>& test() const { return test_; }
  const std::vector<Triple>& split(Split which) const;

  bool contains(const Triple& triple) const;
  // Sorted tails t with (head, rel, t) in any split; rel may be an inverse.
  std::span<const EntityId> known_tails(EntityId head, RelationId rel) const;

  // Writes vocabularies and id-encoded splits into `dir`.
  void save(const std::filesystem::path& dir) const;
  static TripleStore load_saved(const std::filesystem::path& dir);

 private:
  std::uint64_t key(EntityId head, RelationId rel) const;
  void build_index();

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> train_;
  std::vector<Triple> valid_;
  std::vector<Triple> test_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
};

// Parses tab-separated `head<TAB>relation<TAB>tail` files. Ids are assigned in
// first-appearance order over train, valid, then test.
TripleStore load_dataset(const std::filesystem::path& train_path,
                         const std::filesystem::path& valid_path,
                         const std::filesystem::path& test_path);

// Head-tail pairs of one relation, sorted by (head, tail) and deduplicated.
struct PairSet {
  RelationId rel;
  std::vector<EntityPair> pairs;

  bool contains(EntityPair pair) const;
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  // Sorted tails paired with `head`.
  std::span<const EntityPair> with_head(EntityId head) const;
};

PairSet make_pair_set(RelationId rel, std::vector<EntityPair> pairs);

// One PairSet per forward relation, indexed by relation id.
std::vector<PairSet> build_pair_sets(const TripleStore& store);

// Extends forward pair sets [0, R) with swapped inverses at [R, 2R).
std::vector<PairSet> add_inverse_relations(std::span<const PairSet> forward);

// Writes `rel<TAB>head<TAB>tail` id lines for every pair of every set.
void save_pair_sets(const std::filesystem::path& path,
                    std::span<const PairSet> sets);
std::vector<PairSet> load_pair_sets(const std::filesystem::path& path,
                                    std::size_t num_relations);

}  // namespace kbc
