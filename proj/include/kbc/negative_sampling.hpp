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
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "kbc/relation_analysis.hpp"
#include "kbc/rng.hpp"
#include "kbc/triple_store.hpp"
#include "kbc/types.hpp"

namespace kbc {

enum class NegativeStrategy { kNaive, kRcwc, kAdversarial };

std::string_view to_string(NegativeStrategy strategy);

// Tail corruptions of one positive pair. Never contains a positive of the
// relation and never repeats a pair.
struct NegativeBatch {
  RelationId rel;
  EntityPair positive;
  std::vector<EntityPair> pairs;
  NegativeStrategy strategy = NegativeStrategy::kNaive;
};

// Every t' in [0, num_entities) with (head, t') not in `positives`.
std::vector<EntityId> naive_candidates(const PairSet& positives, EntityId head,
                                       std::size_t num_entities);

// Every t' in range(r) with (h, t') not in `positives` and
// co-occur(t, t') <= cooc_threshold.
std::vector<EntityId> rcwc_candidates(const PairSet& positives,
                                      EntityPair positive,
                                      const RelationProfile& profile,
                                      double cooc_threshold);

// Up to `count` distinct uniform draws from naive_candidates. Returns every
// candidate when fewer than `count` exist.
NegativeBatch naive_negatives(const PairSet& positives, EntityPair positive,
                              std::size_t count, std::size_t num_entities,
                              Rng& rng);

// Up to `count` distinct uniform draws from rcwc_candidates. Falls back to
// naive sampling (tagged kNaive) when no rcwc candidate exists.
// `cooc_threshold` must not be below the threshold the profile was pruned at.
NegativeBatch rcwc_negatives(const PairSet& positives, EntityPair positive,
                             std::size_t count, const RelationProfile& profile,
                             double cooc_threshold, std::size_t num_entities,
                             Rng& rng);

// Pool pairs whose predicted probability is at least `threshold`, highest
// first (pool order among equal scores), truncated to `count`.
NegativeBatch adversarial_negatives(const NegativeBatch& pool,
                                    std::span<const double> pool_scores,
                                    double threshold, std::size_t count);

// One line per batch: rel, head, tail, strategy, then negative pairs as
// head:tail, all tab-separated.
void save_negative_batches(const std::filesystem::path& path,
                           std::span<const NegativeBatch> batches);

}  // namespace kbc
