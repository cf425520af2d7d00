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

#include "kbc/negative_sampling.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <spdlog/spdlog.h>

namespace kbc {
namespace {

bool tail_taken(std::span<const EntityPair> with_head, EntityId t) {
  return std::ranges::binary_search(with_head, t, {}, &EntityPair::tail);
}

// Uniform sample of `count` distinct elements from an explicit list.
std::vector<EntityId> sample_from(std::vector<EntityId> valid,
                                  std::size_t count, Rng& rng) {
  if (count >= valid.size()) return valid;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, valid.size() - 1);
    std::swap(valid[i], valid[pick(rng)]);
  }
  valid.resize(count);
  return valid;
}

// Rejection sampling of distinct values drawn by `draw` and accepted by
// `valid`, giving up after a fixed budget of draws.
template <typename Draw, typename Valid>
bool try_rejection(std::size_t count, Draw&& draw, Valid&& valid, Rng& rng,
                   std::vector<EntityId>& out) {
  std::unordered_set<EntityId> chosen;
  const std::size_t budget = 8 * count + 64;
  for (std::size_t attempt = 0; attempt < budget && out.size() < count;
       ++attempt) {
    const EntityId t = draw(rng);
    if (!valid(t) || !chosen.insert(t).second) continue;
    out.push_back(t);
  }
  return out.size() == count;
}

bool rcwc_valid(std::span<const EntityPair> with_head, EntityPair positive,
                EntityId t, const RelationProfile& profile,
                double cooc_threshold) {
  if (tail_taken(with_head, t)) return false;
  if (t == positive.tail) return false;
  const auto it = profile.cooc_above.find(positive.tail);
  if (it == profile.cooc_above.end()) return true;
  const auto& ids = it->second;
  const auto pos = std::lower_bound(ids.begin(), ids.end(), t);
  if (pos == ids.end() || *pos != t) return true;
  const auto count = profile.cooc_counts.at(
      positive.tail)[static_cast<std::size_t>(pos - ids.begin())];
  return !(static_cast<double>(count) > cooc_threshold);
}

NegativeBatch make_batch(RelationId rel, EntityPair positive,
                         const std::vector<EntityId>& tails,
                         NegativeStrategy strategy) {
  NegativeBatch batch{rel, positive, {}, strategy};
  batch.pairs.reserve(tails.size());
  for (EntityId t : tails) batch.pairs.push_back(EntityPair{positive.head, t});
  return batch;
}

}  // namespace

std::string_view to_string(NegativeStrategy strategy) {
  switch (strategy) {
    case NegativeStrategy::kNaive:
      return "naive";
    case NegativeStrategy::kRcwc:
      return "rcwc";
    case NegativeStrategy::kAdversarial:
      return "adversarial";
  }
  return "unknown";
}

std::vector<EntityId> naive_candidates(const PairSet& positives, EntityId head,
                                       std::size_t num_entities) {
  const auto with_head = positives.with_head(head);
  std::vector<EntityId> out;
  out.reserve(num_entities);
  for (std::size_t i = 0; i < num_entities; ++i) {
    const EntityId t(static_cast<std::uint32_t>(i));
    if (!tail_taken(with_head, t)) out.push_back(t);
  }
  return out;
}

std::vector<EntityId> rcwc_candidates(const PairSet& positives,
                                      EntityPair positive,
                                      const RelationProfile& profile,
                                      double cooc_threshold) {
  if (cooc_threshold < profile.cooc_threshold) {
    throw Error("rcwc threshold below the profile's pruning threshold");
  }
  const auto with_head = positives.with_head(positive.head);
  std::vector<EntityId> out;
  for (EntityId t : profile.range) {
    if (rcwc_valid(with_head, positive, t, profile, cooc_threshold)) {
      out.push_back(t);
    }
  }
  return out;
}

NegativeBatch naive_negatives(const PairSet& positives, EntityPair positive,
                              std::size_t count, std::size_t num_entities,
                              Rng& rng) {
  const auto with_head = positives.with_head(positive.head);
  const std::size_t num_valid = num_entities - with_head.size();
  if (count >= num_valid || 4 * count >= num_valid) {
    if (count > num_valid) {
      spdlog::debug("naive_negatives: only {} candidates for {} requested",
                    num_valid, count);
    }
    return make_batch(
        positives.rel, positive,
        sample_from(naive_candidates(positives, positive.head, num_entities),
                    count, rng),
        NegativeStrategy::kNaive);
  }
  std::uniform_int_distribution<std::uint32_t> entity(
      0, static_cast<std::uint32_t>(num_entities - 1));
  std::vector<EntityId> tails;
  tails.reserve(count);
  const bool done = try_rejection(
      count, [&](Rng& g) { return EntityId(entity(g)); },
      [&](EntityId t) { return !tail_taken(with_head, t); }, rng, tails);
  if (!done) {
    tails = sample_from(naive_candidates(positives, positive.head, num_entities),
                        count, rng);
  }
  return make_batch(positives.rel, positive, tails, NegativeStrategy::kNaive);
}

NegativeBatch rcwc_negatives(const PairSet& positives, EntityPair positive,
                             std::size_t count, const RelationProfile& profile,
                             double cooc_threshold, std::size_t num_entities,
                             Rng& rng) {
  if (cooc_threshold < profile.cooc_threshold) {
    throw Error("rcwc threshold below the profile's pruning threshold");
  }
  const auto with_head = positives.with_head(positive.head);
  std::vector<EntityId> tails;
  tails.reserve(count);
  bool done = false;
  if (!profile.range.empty() && count > 0) {
    std::uniform_int_distribution<std::size_t> pick(0,
                                                    profile.range.size() - 1);
    done = try_rejection(
        count, [&](Rng& g) { return profile.range[pick(g)]; },
        [&](EntityId t) {
          return rcwc_valid(with_head, positive, t, profile, cooc_threshold);
        },
        rng, tails);
  }
  if (!done) {
    tails = sample_from(
        rcwc_candidates(positives, positive, profile, cooc_threshold), count,
        rng);
  }
  if (tails.empty() && count > 0) {
    spdlog::debug("rcwc_negatives: no candidates for relation {} head {}; "
                  "falling back to naive",
                  positives.rel.value(), positive.head.value());
    return naive_negatives(positives, positive, count, num_entities, rng);
  }
  return make_batch(positives.rel, positive, tails, NegativeStrategy::kRcwc);
}

NegativeBatch adversarial_negatives(const NegativeBatch& pool,
                                    std::span<const double> pool_scores,
                                    double threshold, std::size_t count) {
  if (pool_scores.size() != pool.pairs.size()) {
    throw Error("adversarial_negatives: score count does not match pool");
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pool.pairs.size(); ++i) {
    if (pool_scores[i] >= threshold) kept.push_back(i);
  }
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    return pool_scores[a] > pool_scores[b];
  });
  if (kept.size() > count) kept.resize(count);
  NegativeBatch batch{pool.rel, pool.positive, {}, NegativeStrategy::kAdversarial};
  for (std::size_t i : kept) batch.pairs.push_back(pool.pairs[i]);
  return batch;
}

void save_negative_batches(const std::filesystem::path& path,
                           std::span<const NegativeBatch> batches) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const NegativeBatch& b : batches) {
    out << b.rel.value() << '\t' << b.positive.head.value() << '\t'
        << b.positive.tail.value() << '\t' << to_string(b.strategy);
    for (const EntityPair& p : b.pairs) {
      out << '\t' << p.head.value() << ':' << p.tail.value();
    }
    out << '\n';
  }
}

}  // namespace kbc
