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
#include <span>
#include <unordered_map>
#include <vector>

#include "kbc/triple_store.hpp"
#include "kbc/types.hpp"

namespace kbc {

// |G1 ∩ G2| / |G2|: the fraction of `g2`'s pairs also held by `g1`.
// Returns 0 when `g2` is empty.
double inference_index(const PairSet& g1, const PairSet& g2);

// `sub` is a subrelation of `super`: inference_index(super, sub) > threshold.
struct SubrelationLink {
  RelationId super;
  RelationId sub;
  double index = 0.0;

  friend bool operator==(const SubrelationLink&,
                         const SubrelationLink&) = default;
};

// All ordered pairs (r1, r2), r1 != r2, whose index strictly exceeds
// `threshold`. Sorted by (super, sub).
std::vector<SubrelationLink> detect_subrelations(std::span<const PairSet> sets,
                                                 double threshold);

// Each relation borrows the original pairs of its subrelations. Right-hand
// sides always use the pre-augmentation sets, so links are not chained.
std::vector<PairSet> augment_positives(std::span<const PairSet> sets,
                                       std::span<const SubrelationLink> links);

// Sorted distinct tails of the pair set.
std::vector<EntityId> compute_range(const PairSet& set);

// Number of heads linked to both `t` and `t2`.
std::size_t co_occurrence(const PairSet& set, EntityId t, EntityId t2);

// Stratified fold assignment: pairs ordered by head (ties shuffled with
// `seed`) and dealt round-robin, so each head's pairs spread across folds.
std::vector<std::uint32_t> stratified_folds(const PairSet& set,
                                            std::size_t folds,
                                            std::uint64_t seed);

// Fraction of pairs whose tail also appears in some other fold.
// `fold_of[i]` is the fold of set.pairs[i].
double lcw_index_with_folds(const PairSet& set,
                            std::span<const std::uint32_t> fold_of);

// lcw index over `folds` stratified folds. Falls back to leave-one-out when
// the set has fewer pairs than folds.
double lcw_index(const PairSet& set, std::size_t folds, std::uint64_t seed);

// Derived priors of one relation.
struct RelationProfile {
  RelationId rel;
  std::vector<EntityId> range;
  double lcw = 0.0;
  // Relations detected as subrelations of `rel`.
  std::vector<RelationId> subrelations;
  // Threshold the co-occurrence table was pruned at.
  double cooc_threshold = 0.0;
  // For each tail t, the tails t' != t with co-occur(t, t') > cooc_threshold,
  // sorted. Symmetric by construction.
  std::unordered_map<EntityId, std::vector<EntityId>> cooc_above;
  // co-occur(t, t') for every stored entry, keyed like cooc_above.
  std::unordered_map<EntityId, std::vector<std::uint32_t>> cooc_counts;

  bool in_range(EntityId t) const;
  // True when co-occur(t, t2) > cooc_threshold (t != t2).
  bool co_occurs_above(EntityId t, EntityId t2) const;
};

struct ProfileOptions {
  double cooc_threshold = 1.0;
  std::size_t lcw_folds = 5;
  std::uint64_t seed = 0;
};

RelationProfile build_profile(const PairSet& set,
                              std::span<const SubrelationLink> links,
                              const ProfileOptions& options);

std::vector<RelationProfile> build_profiles(
    std::span<const PairSet> sets, std::span<const SubrelationLink> links,
    const ProfileOptions& options, int threads = 1);

void save_profiles(const std::filesystem::path& path,
                   std::span<const RelationProfile> profiles);
std::vector<RelationProfile> load_profiles(const std::filesystem::path& path);

void save_subrelations(const std::filesystem::path& path,
                       std::span<const SubrelationLink> links);
std::vector<SubrelationLink> load_subrelations(
    const std::filesystem::path& path);

}  // namespace kbc
