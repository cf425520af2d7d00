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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kbc/triple_store.hpp"
#include "kbc/types.hpp"

namespace kbc {

struct RankResult {
  Triple query;
  // 1 + #higher + ceil(#ties / 2): ties are ranked at their mean position,
  // rounded half up.
  std::size_t rank = 1;
  // Candidates left after filtering, including the query's own tail.
  std::size_t candidates = 1;
};

// Ranks query.tail among all tails, dropping tails of known triples (any
// split) other than the query itself. `tail_scores[e]` scores (h, r, e);
// higher is better.
RankResult filtered_rank(const Triple& query, const TripleStore& store,
                         std::span<const double> tail_scores);

// Fills `out[e]` with the score of (head, rel, e) for every entity e.
using TailScorer =
    std::function<void(EntityId head, RelationId rel, std::span<double> out)>;

RankResult filtered_rank(const Triple& query, const TripleStore& store,
                         const TailScorer& scorer);

struct Metrics {
  std::size_t count = 0;
  double mr = 0.0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};

Metrics summarize(std::span<const RankResult> ranks);

struct RelationMetrics {
  RelationId rel;
  Metrics metrics;
};

struct MetricsReport {
  Metrics overall;
  // One entry per relation id in [0, 2R) that had at least one query.
  std::vector<RelationMetrics> per_relation;
  std::string aggregation;
  std::size_t num_test_triples = 0;
};

MetricsReport build_report(std::span<const RankResult> ranks,
                           std::size_t num_test_triples);

// Tail queries for each triple: (h, r, t) and (t, r^-1, h).
std::vector<Triple> both_direction_queries(std::span<const Triple> triples,
                                           std::size_t num_relations);

// Ranks every query, computing each (head, rel) score vector once.
// Results are returned in query order regardless of `threads`.
std::vector<RankResult> rank_queries(std::span<const Triple> queries,
                                     const TripleStore& store,
                                     const TailScorer& scorer, int threads);

// Machine-readable report: {"aggregation", "num_test_triples", "num_queries",
// "metrics": {"MR", "MRR", "H@1", "H@3", "H@10"}}.
std::string report_json(const MetricsReport& report);
std::string report_table(const MetricsReport& report);
std::string report_csv(const MetricsReport& report, const TripleStore& store);

}  // namespace kbc
