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


#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "kbc/relation_analysis.hpp"
#include "support/synthetic_kg.hpp"

namespace kbc {
namespace {

const EntityId a(0), b(1), c(2), d(3), e(4), f(5);

PairSet set_of(std::uint32_t rel, std::vector<EntityPair> pairs) {
  return make_pair_set(RelationId(rel), std::move(pairs));
}

TEST(InferenceIndexTest, HandExamples) {
  const PairSet g1 = set_of(0, {{a, b}, {c, d}});
  const PairSet g2 = set_of(1, {{a, b}, {e, f}});
  EXPECT_DOUBLE_EQ(inference_index(g1, g2), 0.5);
  EXPECT_DOUBLE_EQ(inference_index(g1, g1), 1.0);
  EXPECT_DOUBLE_EQ(inference_index(g1, set_of(2, {{e, f}})), 0.0);
  EXPECT_DOUBLE_EQ(inference_index(g1, set_of(2, {})), 0.0);
}

TEST(SubrelationTest, SubsetEmitted) {
  const std::vector<PairSet> sets = {set_of(0, {{a, b}, {c, d}}),
                                     set_of(1, {{a, b}})};
  const auto links = detect_subrelations(sets, 0.9);
  ASSERT_EQ(links.size(), 1u);
  EXPECT_EQ(links[0].super, RelationId(0));
  EXPECT_EQ(links[0].sub, RelationId(1));
  EXPECT_DOUBLE_EQ(links[0].index, 1.0);
}

TEST(SubrelationTest, BelowThresholdNotEmitted) {
  const std::vector<PairSet> sets = {set_of(0, {{a, b}, {c, d}}),
                                     set_of(1, {{a, b}, {e, f}})};
  EXPECT_TRUE(detect_subrelations(sets, 0.9).empty());
  // Strict inequality: index 0.5 is not above 0.5.
  EXPECT_TRUE(detect_subrelations(sets, 0.5).empty());
  EXPECT_EQ(detect_subrelations(sets, 0.49).size(), 2u);
}

TEST(SubrelationTest, MutualLinksAndNoSelfPairs) {
  const std::vector<PairSet> sets = {set_of(0, {{a, b}}), set_of(1, {{a, b}})};
  const auto links = detect_subrelations(sets, 0.9);
  ASSERT_EQ(links.size(), 2u);
  for (const auto& l : links) EXPECT_NE(l.super, l.sub);
}

TEST(AugmentTest, ScenarioOne) {
  const std::vector<PairSet> sets = {set_of(0, {{a, b}}), set_of(1, {{c, d}})};
  const std::vector<SubrelationLink> links = {{RelationId(0), RelationId(1), 1.0}};
  const auto aug = augment_positives(sets, links);
  EXPECT_EQ(aug[0].pairs, (std::vector<EntityPair>{{a, b}, {c, d}}));
  EXPECT_EQ(aug[1].pairs, (std::vector<EntityPair>{{c, d}}));
}

TEST(AugmentTest, MutualLinksShareUnion) {
  const std::vector<PairSet> sets = {set_of(0, {{a, b}, {c, d}}),
                                     set_of(1, {{a, b}, {e, f}})};
  const auto links = detect_subrelations(sets, 0.4);
  const auto aug = augment_positives(sets, links);
  EXPECT_EQ(aug[0].pairs, aug[1].pairs);
  EXPECT_EQ(aug[0].size(), 3u);
}

TEST(AugmentTest, NoLinksIsIdentity) {
  const std::vector<PairSet> sets = {set_of(0, {{a, b}}), set_of(1, {{c, d}})};
  const auto aug = augment_positives(sets, {});
  EXPECT_EQ(aug[0].pairs, sets[0].pairs);
  EXPECT_EQ(aug[1].pairs, sets[1].pairs);
}

TEST(AugmentTest, NoTransitiveClosure) {
  // 0 borrows from 1, 1 borrows from 2; 0 must not receive 2's pairs.
  const std::vector<PairSet> sets = {set_of(0, {{a, b}}), set_of(1, {{c, d}}),
                                     set_of(2, {{e, f}})};
  const std::vector<SubrelationLink> links = {{RelationId(0), RelationId(1), 1.0},
                                              {RelationId(1), RelationId(2), 1.0}};
  const auto aug = augment_positives(sets, links);
  EXPECT_EQ(aug[0].pairs, (std::vector<EntityPair>{{a, b}, {c, d}}));
  EXPECT_EQ(aug[1].pairs, (std::vector<EntityPair>{{c, d}, {e, f}}));
}

TEST(AugmentTest, MonotoneOnRandomKg) {
  const TripleStore store = testing::random_store(15, 4, 120, 9);
  const auto sets = add_inverse_relations(build_pair_sets(store));
  const auto links = detect_subrelations(sets, 0.3);
  const auto aug = augment_positives(sets, links);
  for (std::size_t r = 0; r < sets.size(); ++r) {
    for (const auto& p : sets[r].pairs) EXPECT_TRUE(aug[r].contains(p));
    for (const auto& p : aug[r].pairs) {
      bool from_link = sets[r].contains(p);
      for (const auto& l : links) {
        if (l.super.value() == r) from_link |= sets[l.sub.value()].contains(p);
      }
      EXPECT_TRUE(from_link);
    }
  }
}

TEST(RangeTest, Examples) {
  EXPECT_EQ(compute_range(set_of(0, {{a, b}, {c, b}})), (std::vector<EntityId>{b}));
  EXPECT_TRUE(compute_range(set_of(0, {})).empty());
  EXPECT_EQ(compute_range(set_of(0, {{a, b}, {a, c}})),
            (std::vector<EntityId>{b, c}));
}

TEST(RangeTest, InverseRangeIsDomain) {
  const TripleStore store = testing::random_store(20, 3, 80, 4);
  const auto sets = add_inverse_relations(build_pair_sets(store));
  const std::size_t R = store.num_relations();
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<EntityId> heads;
    for (const auto& p : sets[r].pairs) heads.push_back(p.head);
    std::sort(heads.begin(), heads.end());
    heads.erase(std::unique(heads.begin(), heads.end()), heads.end());
    EXPECT_EQ(compute_range(sets[r + R]), heads);
  }
}

TEST(CoOccurrenceTest, Examples) {
  const EntityId h1(0), h2(1), t1(2), t2(3), t3(4);
  const PairSet g = set_of(0, {{h1, t1}, {h1, t2}, {h2, t1}, {h2, t2}, {h2, t3}});
  EXPECT_EQ(co_occurrence(g, t1, t2), 2u);
  EXPECT_EQ(co_occurrence(g, t2, t1), 2u);
  EXPECT_EQ(co_occurrence(g, t1, t1), 2u);
  EXPECT_EQ(co_occurrence(g, t3, t3), 1u);
  const PairSet disjoint = set_of(0, {{h1, t1}, {h2, t2}});
  EXPECT_EQ(co_occurrence(disjoint, t1, t2), 0u);
}

TEST(LcwTest, HandExamples) {
  // All pairs share one tail.
  EXPECT_DOUBLE_EQ(lcw_index(set_of(0, {{a, f}, {b, f}, {c, f}, {d, f}}), 2, 1),
                   1.0);
  // All tails unique.
  EXPECT_DOUBLE_EQ(lcw_index(set_of(0, {{a, b}, {c, d}, {e, f}, {f, a}}), 2, 1),
                   0.0);
  // Tails {x, x, x, y}, folds {x, x} / {x, y}.
  const EntityId x(10), y(11);
  const PairSet s = set_of(0, {{a, x}, {b, x}, {c, x}, {d, y}});
  const std::vector<std::uint32_t> folds = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(lcw_index_with_folds(s, folds), 0.75);
  EXPECT_DOUBLE_EQ(lcw_index(set_of(0, {}), 5, 1), 0.0);
}

TEST(LcwTest, FewerPairsThanFoldsUsesLeaveOneOut) {
  const EntityId x(10);
  // Two pairs sharing a tail: each tail is present in the other singleton fold.
  EXPECT_DOUBLE_EQ(lcw_index(set_of(0, {{a, x}, {b, x}}), 5, 1), 1.0);
  EXPECT_DOUBLE_EQ(lcw_index(set_of(0, {{a, x}, {b, c}}), 5, 1), 0.0);
}

TEST(LcwTest, StratifiedFoldsBalancedAndDeterministic) {
  const TripleStore store = testing::random_store(30, 2, 200, 12);
  const auto sets = build_pair_sets(store);
  const auto f1 = stratified_folds(sets[0], 5, 42);
  const auto f2 = stratified_folds(sets[0], 5, 42);
  EXPECT_EQ(f1, f2);
  std::vector<std::size_t> counts(5, 0);
  for (auto fold : f1) ++counts.at(fold);
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  EXPECT_LE(*hi - *lo, 1u);
  const double lcw = lcw_index(sets[0], 5, 42);
  EXPECT_GE(lcw, 0.0);
  EXPECT_LE(lcw, 1.0);
  EXPECT_EQ(lcw, lcw_index(sets[0], 5, 42));
}

TEST(ProfileTest, CooccurrenceTableIsSymmetricAndPruned) {
  const TripleStore store = testing::random_store(12, 2, 100, 21);
  const auto sets = add_inverse_relations(build_pair_sets(store));
  ProfileOptions options;
  options.cooc_threshold = 1.0;
  for (const PairSet& s : sets) {
    const RelationProfile p = build_profile(s, {}, options);
    EXPECT_EQ(p.range, compute_range(s));
    EXPECT_EQ(p.range.empty(), s.empty());
    for (EntityId t : p.range) {
      for (EntityId t2 : p.range) {
        if (t == t2) continue;
        const bool above = co_occurrence(s, t, t2) > 1;
        EXPECT_EQ(p.co_occurs_above(t, t2), above);
        EXPECT_EQ(p.co_occurs_above(t2, t), above);
      }
    }
  }
}

TEST(ProfileTest, SaveLoadRoundTrip) {
  const TripleStore store = testing::random_store(15, 3, 120, 2);
  const auto sets = add_inverse_relations(build_pair_sets(store));
  const auto links = detect_subrelations(sets, 0.3);
  const auto profiles = build_profiles(sets, links, ProfileOptions{}, 2);
  testing::TempDir dir;
  save_profiles(dir.path() / "p.json", profiles);
  const auto back = load_profiles(dir.path() / "p.json");
  ASSERT_EQ(back.size(), profiles.size());
  for (std::size_t r = 0; r < back.size(); ++r) {
    EXPECT_EQ(back[r].rel, profiles[r].rel);
    EXPECT_EQ(back[r].range, profiles[r].range);
    EXPECT_EQ(back[r].lcw, profiles[r].lcw);
    EXPECT_EQ(back[r].subrelations, profiles[r].subrelations);
    EXPECT_EQ(back[r].cooc_above, profiles[r].cooc_above);
    EXPECT_EQ(back[r].cooc_counts, profiles[r].cooc_counts);
  }
  save_subrelations(dir.path() / "s.json", links);
  EXPECT_EQ(load_subrelations(dir.path() / "s.json"), links);
}

TEST(ProfileTest, InfiniteThresholdKeepsNoEntries) {
  const TripleStore store = testing::random_store(10, 1, 60, 8);
  const auto sets = build_pair_sets(store);
  ProfileOptions options;
  options.cooc_threshold = std::numeric_limits<double>::infinity();
  const RelationProfile p = build_profile(sets[0], {}, options);
  EXPECT_TRUE(p.cooc_above.empty());
  testing::TempDir dir;
  save_profiles(dir.path() / "p.json", std::vector<RelationProfile>{p});
  EXPECT_TRUE(std::isinf(load_profiles(dir.path() / "p.json")[0].cooc_threshold));
}

}  // namespace
}  // namespace kbc
