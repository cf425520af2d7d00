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

#include "kbc/relation_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "kbc/parallel.hpp"
#include "kbc/rng.hpp"

namespace kbc {
namespace {

std::size_t intersection_size(const PairSet& a, const PairSet& b) {
  std::size_t count = 0;
  auto i = a.pairs.begin();
  auto j = b.pairs.begin();
  while (i != a.pairs.end() && j != b.pairs.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

nlohmann::json threshold_to_json(double value) {
  if (std::isinf(value)) return "inf";
  return value;
}

double threshold_from_json(const nlohmann::json& value) {
  if (value.is_string() && value.get<std::string>() == "inf") {
    return std::numeric_limits<double>::infinity();
  }
  return value.get<double>();
}

}  // namespace

double inference_index(const PairSet& g1, const PairSet& g2) {
  if (g2.empty()) {
    spdlog::debug("inference_index: empty pair set for relation {}",
                  g2.rel.value());
    return 0.0;
  }
  return static_cast<double>(intersection_size(g1, g2)) /
         static_cast<double>(g2.size());
}

std::vector<SubrelationLink> detect_subrelations(std::span<const PairSet> sets,
                                                 double threshold) {
  std::vector<SubrelationLink> links;
  for (const PairSet& super : sets) {
    for (const PairSet& sub : sets) {
      if (super.rel == sub.rel || sub.empty()) continue;
      // |G1 ∩ G2| <= |G1| bounds the index by |G1| / |G2|.
      if (static_cast<double>(super.size()) <=
          threshold * static_cast<double>(sub.size())) {
        continue;
      }
      const double index = inference_index(super, sub);
      if (index > threshold) {
        links.push_back(SubrelationLink{super.rel, sub.rel, index});
      }
    }
  }
  std::sort(links.begin(), links.end(), [](const auto& a, const auto& b) {
    return std::pair(a.super, a.sub) < std::pair(b.super, b.sub);
  });
  return links;
}

std::vector<PairSet> augment_positives(std::span<const PairSet> sets,
                                       std::span<const SubrelationLink> links) {
  std::vector<PairSet> augmented(sets.begin(), sets.end());
  std::map<RelationId, std::vector<RelationId>> borrow;
  for (const SubrelationLink& link : links) {
    borrow[link.super].push_back(link.sub);
  }
  for (const auto& [super, subs] : borrow) {
    PairSet& target = augmented.at(super.value());
    std::vector<EntityPair> merged = sets[super.value()].pairs;
    for (RelationId sub : subs) {
      const auto& extra = sets[sub.value()].pairs;
      merged.insert(merged.end(), extra.begin(), extra.end());
    }
    target = make_pair_set(super, std::move(merged));
  }
  return augmented;
}

std::vector<EntityId> compute_range(const PairSet& set) {
  std::vector<EntityId> range;
  range.reserve(set.size());
  for (const EntityPair& p : set.pairs) range.push_back(p.tail);
  std::sort(range.begin(), range.end());
  range.erase(std::unique(range.begin(), range.end()), range.end());
  return range;
}

std::size_t co_occurrence(const PairSet& set, EntityId t, EntityId t2) {
  std::size_t count = 0;
  for (auto it = set.pairs.begin(); it != set.pairs.end();) {
    const EntityId head = it->head;
    bool has_t = false;
    bool has_t2 = false;
    for (; it != set.pairs.end() && it->head == head; ++it) {
      has_t = has_t || it->tail == t;
      has_t2 = has_t2 || it->tail == t2;
    }
    if (has_t && has_t2) ++count;
  }
  return count;
}

std::vector<std::uint32_t> stratified_folds(const PairSet& set,
                                            std::size_t folds,
                                            std::uint64_t seed) {
  std::vector<std::uint32_t> fold_of(set.size(), 0);
  if (folds == 0) return fold_of;
  Rng rng = derive_rng(seed, {set.rel.value()});
  // Pairs are already grouped by head; shuffle within each head group.
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t begin = 0; begin < order.size();) {
    std::size_t end = begin;
    while (end < order.size() &&
           set.pairs[end].head == set.pairs[begin].head) {
      ++end;
    }
    std::shuffle(order.begin() + static_cast<std::ptrdiff_t>(begin),
                 order.begin() + static_cast<std::ptrdiff_t>(end), rng);
    begin = end;
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    fold_of[order[i]] = static_cast<std::uint32_t>(i % folds);
  }
  return fold_of;
}

double lcw_index_with_folds(const PairSet& set,
                            std::span<const std::uint32_t> fold_of) {
  if (set.empty()) return 0.0;
  if (fold_of.size() != set.size()) {
    throw Error("lcw_index: fold assignment size mismatch");
  }
  // Occurrences of each tail, overall and per fold.
  std::unordered_map<EntityId, std::size_t> total;
  std::map<std::pair<std::uint32_t, EntityId>, std::size_t> per_fold;
  for (std::size_t i = 0; i < set.size(); ++i) {
    ++total[set.pairs[i].tail];
    ++per_fold[{fold_of[i], set.pairs[i].tail}];
  }
  std::size_t missing_elsewhere = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const EntityId tail = set.pairs[i].tail;
    if (total[tail] == per_fold[{fold_of[i], tail}]) ++missing_elsewhere;
  }
  return 1.0 - static_cast<double>(missing_elsewhere) /
                   static_cast<double>(set.size());
}

double lcw_index(const PairSet& set, std::size_t folds, std::uint64_t seed) {
  if (set.empty()) return 0.0;
  if (set.size() < folds) {
    spdlog::debug("lcw_index: relation {} has {} pairs < {} folds; using "
                  "leave-one-out",
                  set.rel.value(), set.size(), folds);
    folds = set.size();
  }
  const auto fold_of = stratified_folds(set, folds, seed);
  return lcw_index_with_folds(set, fold_of);
}

bool RelationProfile::in_range(EntityId t) const {
  return std::binary_search(range.begin(), range.end(), t);
}

bool RelationProfile::co_occurs_above(EntityId t, EntityId t2) const {
  const auto it = cooc_above.find(t);
  if (it == cooc_above.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(), t2);
}

RelationProfile build_profile(const PairSet& set,
                              std::span<const SubrelationLink> links,
                              const ProfileOptions& options) {
  RelationProfile profile;
  profile.rel = set.rel;
  profile.range = compute_range(set);
  profile.lcw = lcw_index(set, options.lcw_folds, options.seed);
  profile.cooc_threshold = options.cooc_threshold;
  for (const SubrelationLink& link : links) {
    if (link.super == set.rel) profile.subrelations.push_back(link.sub);
  }
  std::sort(profile.subrelations.begin(), profile.subrelations.end());

  // Heads of each range entity, then tail counts through shared heads.
  std::unordered_map<EntityId, std::vector<EntityId>> heads_of;
  for (const EntityPair& p : set.pairs) heads_of[p.tail].push_back(p.head);
  std::unordered_map<EntityId, std::uint32_t> counts;
  for (EntityId t : profile.range) {
    counts.clear();
    for (EntityId h : heads_of[t]) {
      for (const EntityPair& p : set.with_head(h)) {
        if (p.tail != t) ++counts[p.tail];
      }
    }
    std::vector<std::pair<EntityId, std::uint32_t>> above;
    for (const auto& [t2, c] : counts) {
      if (static_cast<double>(c) > options.cooc_threshold) {
        above.emplace_back(t2, c);
      }
    }
    if (above.empty()) continue;
    std::sort(above.begin(), above.end());
    auto& ids = profile.cooc_above[t];
    auto& cs = profile.cooc_counts[t];
    for (const auto& [t2, c] : above) {
      ids.push_back(t2);
      cs.push_back(c);
    }
  }
  return profile;
}

std::vector<RelationProfile> build_profiles(
    std::span<const PairSet> sets, std::span<const SubrelationLink> links,
    const ProfileOptions& options, int threads) {
  std::vector<RelationProfile> profiles(sets.size());
  parallel_for(sets.size(), threads, [&](std::size_t r) {
    profiles[r] = build_profile(sets[r], links, options);
  });
  return profiles;
}

void save_profiles(const std::filesystem::path& path,
                   std::span<const RelationProfile> profiles) {
  nlohmann::json records = nlohmann::json::array();
  for (const RelationProfile& p : profiles) {
    nlohmann::json range = nlohmann::json::array();
    for (EntityId t : p.range) range.push_back(t.value());
    nlohmann::json subs = nlohmann::json::array();
    for (RelationId r : p.subrelations) subs.push_back(r.value());
    // Each symmetric entry is written once, as t < t2.
    nlohmann::json cooc = nlohmann::json::array();
    std::vector<EntityId> keys;
    for (const auto& [t, _] : p.cooc_above) keys.push_back(t);
    std::sort(keys.begin(), keys.end());
    for (EntityId t : keys) {
      const auto& ids = p.cooc_above.at(t);
      const auto& cs = p.cooc_counts.at(t);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (t < ids[i]) {
          cooc.push_back({t.value(), ids[i].value(), cs[i]});
        }
      }
    }
    records.push_back({{"rel", p.rel.value()},
                       {"lcw", p.lcw},
                       {"cooc_threshold", threshold_to_json(p.cooc_threshold)},
                       {"range", std::move(range)},
                       {"subrelations", std::move(subs)},
                       {"cooc", std::move(cooc)}});
  }
  nlohmann::json doc = {{"format", "kbc-relation-profiles"},
                        {"version", 1},
                        {"profiles", std::move(records)}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

std::vector<RelationProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "kbc-relation-profiles" ||
      doc.value("version", 0) != 1) {
    throw Error(path.string() + ": not a version 1 relation-profile file");
  }
  std::vector<RelationProfile> profiles;
  for (const auto& rec : doc.at("profiles")) {
    RelationProfile p;
    p.rel = RelationId(rec.at("rel").get<std::uint32_t>());
    p.lcw = rec.at("lcw").get<double>();
    p.cooc_threshold = threshold_from_json(rec.at("cooc_threshold"));
    for (const auto& t : rec.at("range")) {
      p.range.emplace_back(t.get<std::uint32_t>());
    }
    for (const auto& r : rec.at("subrelations")) {
      p.subrelations.emplace_back(r.get<std::uint32_t>());
    }
    std::map<EntityId, std::vector<std::pair<EntityId, std::uint32_t>>> rows;
    for (const auto& e : rec.at("cooc")) {
      const EntityId a(e.at(0).get<std::uint32_t>());
      const EntityId b(e.at(1).get<std::uint32_t>());
      const auto c = e.at(2).get<std::uint32_t>();
      rows[a].emplace_back(b, c);
      rows[b].emplace_back(a, c);
    }
    for (auto& [t, entries] : rows) {
      std::sort(entries.begin(), entries.end());
      for (const auto& [t2, c] : entries) {
        p.cooc_above[t].push_back(t2);
        p.cooc_counts[t].push_back(c);
      }
    }
    profiles.push_back(std::move(p));
  }
  return profiles;
}

void save_subrelations(const std::filesystem::path& path,
                       std::span<const SubrelationLink> links) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : links) {
    arr.push_back({{"super", l.super.value()},
                   {"sub", l.sub.value()},
                   {"index", l.index}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << arr.dump(1) << '\n';
}

std::vector<SubrelationLink> load_subrelations(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<SubrelationLink> links;
  for (const auto& l : nlohmann::json::parse(in)) {
    links.push_back(SubrelationLink{RelationId(l.at("super").get<std::uint32_t>()),
                                    RelationId(l.at("sub").get<std::uint32_t>()),
                                    l.at("index").get<double>()});
  }
  return links;
}

}  // namespace kbc
