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

#include "kbc/ranking.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "kbc/parallel.hpp"

namespace kbc {

RankResult filtered_rank(const Triple& query, const TripleStore& store,
                         std::span<const double> tail_scores) {
  if (tail_scores.size() != store.num_entities()) {
    throw Error("filtered_rank: score vector size mismatch");
  }
  const auto known = store.known_tails(query.head, query.rel);
  const double target = tail_scores[query.tail.value()];
  std::size_t higher = 0;
  std::size_t ties = 0;
  std::size_t filtered = 0;
  auto next_known = known.begin();
  for (std::size_t e = 0; e < tail_scores.size(); ++e) {
    const EntityId t(static_cast<std::uint32_t>(e));
    while (next_known != known.end() && *next_known < t) ++next_known;
    if (t == query.tail) continue;
    if (next_known != known.end() && *next_known == t) {
      ++filtered;
      continue;
    }
    const double s = tail_scores[e];
    if (s > target) {
      ++higher;
    } else if (s == target) {
      ++ties;
    }
  }
  RankResult result;
  result.query = query;
  result.rank = 1 + higher + (ties + 1) / 2;
  result.candidates = tail_scores.size() - filtered;
  return result;
}

RankResult filtered_rank(const Triple& query, const TripleStore& store,
                         const TailScorer& scorer) {
  std::vector<double> scores(store.num_entities());
  scorer(query.head, query.rel, scores);
  return filtered_rank(query, store, scores);
}

Metrics summarize(std::span<const RankResult> ranks) {
  Metrics m;
  m.count = ranks.size();
  if (ranks.empty()) return m;
  for (const RankResult& r : ranks) {
    const double rank = static_cast<double>(r.rank);
    m.mr += rank;
    m.mrr += 1.0 / rank;
    m.hits1 += r.rank <= 1 ? 1.0 : 0.0;
    m.hits3 += r.rank <= 3 ? 1.0 : 0.0;
    m.hits10 += r.rank <= 10 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ranks.size());
  m.mr /= n;
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

MetricsReport build_report(std::span<const RankResult> ranks,
                           std::size_t num_test_triples) {
  MetricsReport report;
  report.overall = summarize(ranks);
  report.aggregation =
      "tail prediction over both directions: (h, r, ?) and (t, r^-1, ?)";
  report.num_test_triples = num_test_triples;
  std::map<RelationId, std::vector<RankResult>> by_rel;
  for (const RankResult& r : ranks) by_rel[r.query.rel].push_back(r);
  for (const auto& [rel, rs] : by_rel) {
    report.per_relation.push_back(RelationMetrics{rel, summarize(rs)});
  }
  return report;
}

std::vector<Triple> both_direction_queries(std::span<const Triple> triples,
                                           std::size_t num_relations) {
  std::vector<Triple> queries;
  queries.reserve(2 * triples.size());
  for (const Triple& t : triples) {
    queries.push_back(t);
    queries.push_back(
        Triple{t.tail, inverse_relation(t.rel, num_relations), t.head});
  }
  return queries;
}

std::vector<RankResult> rank_queries(std::span<const Triple> queries,
                                     const TripleStore& store,
                                     const TailScorer& scorer, int threads) {
  // Group queries sharing (rel, head) so each score vector is built once.
  std::vector<std::size_t> order(queries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(queries[a].rel, queries[a].head) <
           std::pair(queries[b].rel, queries[b].head);
  });
  std::vector<std::size_t> group_start;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || queries[order[i]].rel != queries[order[i - 1]].rel ||
        queries[order[i]].head != queries[order[i - 1]].head) {
      group_start.push_back(i);
    }
  }
  group_start.push_back(order.size());

  std::vector<RankResult> results(queries.size());
  parallel_for(group_start.size() - 1, threads, [&](std::size_t g) {
    std::vector<double> scores(store.num_entities());
    const Triple& first = queries[order[group_start[g]]];
    scorer(first.head, first.rel, scores);
    for (std::size_t i = group_start[g]; i < group_start[g + 1]; ++i) {
      results[order[i]] = filtered_rank(queries[order[i]], store, scores);
    }
  });
  return results;
}

namespace {

nlohmann::ordered_json metrics_json(const Metrics& m) {
  return {{"MR", m.mr},
          {"MRR", m.mrr},
          {"H@1", m.hits1},
          {"H@3", m.hits3},
          {"H@10", m.hits10}};
}

}  // namespace

std::string report_json(const MetricsReport& report) {
  nlohmann::ordered_json doc = {
      {"aggregation", report.aggregation},
      {"num_test_triples", report.num_test_triples},
      {"num_queries", report.overall.count},
      {"metrics", metrics_json(report.overall)}};
  return doc.dump(2) + "\n";
}

std::string report_table(const MetricsReport& report) {
  std::string out = fmt::format("# {}\n", report.aggregation);
  out += fmt::format("{:>10} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "queries", "MR",
                     "MRR", "H@1", "H@3", "H@10");
  const Metrics& m = report.overall;
  out += fmt::format("{:>10} {:>8.1f} {:>8.4f} {:>8.4f} {:>8.4f} {:>8.4f}\n",
                     m.count, m.mr, m.mrr, m.hits1, m.hits3, m.hits10);
  return out;
}

std::string report_csv(const MetricsReport& report, const TripleStore& store) {
  const std::size_t num_rel = store.num_relations();
  std::string out = "relation_id,relation,direction,queries,MR,MRR,H@1,H@3,H@10\n";
  for (const auto& [rel, m] : report.per_relation) {
    const bool inverse = is_inverse(rel, num_rel);
    const auto forward = inverse ? inverse_relation(rel, num_rel) : rel;
    std::string name = store.relations().name(forward.value());
    // Quote names for CSV safety.
    std::string quoted = "\"";
    for (char c : name) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    quoted += '"';
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", rel.value(), quoted,
                       inverse ? "inverse" : "forward", m.count, m.mr, m.mrr,
                       m.hits1, m.hits3, m.hits10);
  }
  return out;
}

}  // namespace kbc
