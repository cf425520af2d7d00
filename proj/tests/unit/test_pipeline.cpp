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

#include <gtest/gtest.h>

#include "kbc/math.hpp"
#include "kbc/pipeline.hpp"
#include "support/synthetic_kg.hpp"

namespace kbc {
namespace {

struct Fixture {
  TripleStore store;
  EmbeddingModel embeddings;
};

const Fixture& small_kg() {
  static const Fixture f = [] {
    testing::SyntheticKgOptions o;
    o.num_types = 3;
    o.entities_per_type = 20;
    o.num_relations = 3;
    o.seed = 5;
    TripleStore store = testing::synthetic_store(testing::make_synthetic_kg(o));
    EmbeddingTrainConfig cfg;
    cfg.kind = EmbeddingKind::kTranslational;
    cfg.dim = 8;
    cfg.steps = 300;
    cfg.batch_size = 64;
    cfg.negatives = 8;
    cfg.learning_rate = 0.05;
    cfg.seed = 2;
    EmbeddingModel m = train_embeddings(store, cfg);
    return Fixture{std::move(store), std::move(m)};
  }();
  return f;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.negatives_per_positive = 8;
  c.gbt.num_estimators = 20;
  c.gbt.max_depth = 2;
  c.gbt.learning_rate = 0.3;
  c.seed = 3;
  return c;
}

TEST(StagingTest, StageBoundaries) {
  EXPECT_EQ(stage_one_trees(1000, 0.0), 1000);
  EXPECT_EQ(stage_one_trees(1000, 0.5), 500);
  EXPECT_EQ(stage_one_trees(300, 0.5), 150);
  EXPECT_EQ(stage_one_trees(5, 0.5), 2);
}

TEST(LcwaScoreTest, Examples) {
  RelationProfile p;
  p.range = {EntityId(1), EntityId(2)};
  p.lcw = 0.95;
  EXPECT_EQ(lcwa_score(p, EntityId(5), 0.7, 0.9), 0.0);
  EXPECT_EQ(lcwa_score(p, EntityId(2), 0.7, 0.9), 0.7);
  p.lcw = 0.5;
  EXPECT_EQ(lcwa_score(p, EntityId(5), 0.7, 0.9), 0.7);
  // Strict inequality.
  p.lcw = 0.9;
  EXPECT_EQ(lcwa_score(p, EntityId(5), 0.7, 0.9), 0.7);
}

TEST(BaseStrategyTest, AutoRule) {
  RelationProfile p;
  for (std::uint32_t e = 0; e < 4; ++e) p.range.push_back(EntityId(e));
  PipelineConfig c;
  EXPECT_EQ(choose_base_strategy(p, 10, c), NegativeStrategy::kRcwc);
  EXPECT_EQ(choose_base_strategy(p, 8, c), NegativeStrategy::kNaive);
  c.base_negatives = BaseNegativeMode::kRcwc;
  EXPECT_EQ(choose_base_strategy(p, 8, c), NegativeStrategy::kRcwc);
  c.disabled.rcwc = true;
  EXPECT_EQ(choose_base_strategy(p, 10, c), NegativeStrategy::kNaive);
}

TEST(AblationTest, ParseNames) {
  const std::vector<std::string> names = {"rcwc", "lcwa-prediction"};
  const Ablation a = parse_ablation(names);
  EXPECT_TRUE(a.rcwc);
  EXPECT_TRUE(a.lcwa_prediction);
  EXPECT_FALSE(a.relation_inference);
  EXPECT_EQ(a.name(), "rcwc+lcwa-prediction");
  EXPECT_EQ(Ablation{}.name(), "none");
  const std::vector<std::string> bad = {"dropout"};
  EXPECT_THROW(parse_ablation(bad), Error);
}

TEST(FamilyDefaultsTest, Presets) {
  const FamilyDefaults fb = family_defaults("freebase");
  EXPECT_EQ(fb.negatives_per_positive, 64u);
  EXPECT_EQ(fb.num_estimators, 1000);
  EXPECT_EQ(fb.max_depth, 5);
  EXPECT_EQ(fb.embedding_dim, 1000u);
  const FamilyDefaults wn = family_defaults("wordnet");
  EXPECT_EQ(wn.negatives_per_positive, 32u);
  EXPECT_EQ(wn.num_estimators, 1500);
  EXPECT_EQ(wn.max_depth, 3);
  EXPECT_EQ(wn.embedding_dim, 500u);
  EXPECT_THROW(family_defaults("yago"), Error);
}

TEST(PipelineConfigTest, Validation) {
  PipelineConfig c;
  c.adversarial_fraction = 1.0;
  EXPECT_THROW(validate(c), Error);
  c = {};
  c.lcw_threshold = 1.5;
  EXPECT_THROW(validate(c), Error);
  c = {};
  c.lcw_folds = 1;
  EXPECT_THROW(validate(c), Error);
}

TEST(TrainRelationTest, TooFewPositivesGivesFallback) {
  const Fixture& f = small_kg();
  const PairSet tiny = make_pair_set(RelationId(0), {{EntityId(0), EntityId(1)}});
  RelationProfile profile;
  profile.rel = RelationId(0);
  profile.range = {EntityId(1)};
  const auto r = train_relation(RelationId(0), tiny, profile, f.embeddings, small_config());
  EXPECT_FALSE(r.ensemble.has_value());
  EXPECT_EQ(r.positives, 1u);
}

TEST(TrainRelationTest, ZeroFractionIsSingleStage) {
  const Fixture& f = small_kg();
  PipelineConfig c = small_config();
  c.adversarial_fraction = 0.0;
  const RelationPriors priors = analyze_relations(f.store, c);
  const auto r = train_relation(RelationId(0), priors.augmented[0], priors.profiles[0],
                                f.embeddings, c);
  ASSERT_TRUE(r.ensemble);
  EXPECT_EQ(r.ensemble->trees().size(), 20u);
  EXPECT_EQ(r.adversarial_negatives, 0u);
}

TEST(TrainRelationTest, AdversarialStageDoesNotWorsenUnionPool) {
  const Fixture& f = small_kg();
  PipelineConfig c = small_config();
  c.record_negatives = true;
  const RelationPriors priors = analyze_relations(f.store, c);
  int checked = 0;
  for (std::size_t rel = 0; rel < priors.augmented.size(); ++rel) {
    const auto r = train_relation(RelationId(std::uint32_t(rel)), priors.augmented[rel],
                                  priors.profiles[rel], f.embeddings, c);
    if (!r.ensemble || r.adversarial_negatives == 0) continue;
    ++checked;
    EXPECT_EQ(r.ensemble->trees().size(), 20u);
    LabeledMatrix pool(feature_dim(f.embeddings));
    std::vector<float> row(feature_dim(f.embeddings));
    for (const auto& p : priors.augmented[rel].pairs) {
      write_features(f.embeddings, p.head, p.tail, row);
      pool.add_row(row, 1.0);
    }
    for (const auto* batches : {&r.base_batches, &r.adversarial_batches}) {
      for (const auto& b : *batches) {
        for (const auto& p : b.pairs) {
          EXPECT_FALSE(priors.augmented[rel].contains(p));
          write_features(f.embeddings, p.head, p.tail, row);
          pool.add_row(row, 0.0);
        }
      }
    }
    TreeEnsemble stage_one(r.ensemble->feature_dim(), r.ensemble->learning_rate());
    for (int k = 0; k < stage_one_trees(20, c.adversarial_fraction); ++k) {
      stage_one.add_tree(r.ensemble->trees()[std::size_t(k)]);
    }
    EXPECT_LE(mean_logloss(*r.ensemble, pool), mean_logloss(stage_one, pool));
  }
  EXPECT_GT(checked, 0);
}

TEST(TrainAllTest, ThreadIndependent) {
  const Fixture& f = small_kg();
  PipelineConfig c = small_config();
  const RelationPriors priors = analyze_relations(f.store, c);
  const auto one = train_all_relations(priors, f.embeddings, c);
  c.threads = 3;
  const auto three = train_all_relations(priors, f.embeddings, c);
  ASSERT_EQ(one.size(), 2 * f.store.num_relations());
  for (std::size_t r = 0; r < one.size(); ++r) {
    ASSERT_EQ(one[r].ensemble.has_value(), three[r].ensemble.has_value());
    if (one[r].ensemble) {
      EXPECT_EQ(serialize_ensemble(*one[r].ensemble, 0),
                serialize_ensemble(*three[r].ensemble, 0));
    }
  }
}

TEST(LinkScorerTest, FallbackAndGating) {
  const Fixture& f = small_kg();
  PipelineConfig c = small_config();
  const RelationPriors priors = analyze_relations(f.store, c);
  const std::size_t slots = priors.profiles.size();
  std::vector<std::optional<TreeEnsemble>> none(slots);
  const LinkScorer raw(f.embeddings, priors.profiles, none, 0.9, false);
  const LinkScorer gated(f.embeddings, priors.profiles, none, 0.9, true);
  std::vector<double> a(f.store.num_entities()), b(f.store.num_entities());
  for (std::size_t r = 0; r < slots; ++r) {
    const RelationId rel{static_cast<std::uint32_t>(r)};
    const EntityId head(3);
    raw.score_tails(head, rel, a);
    gated.score_tails(head, rel, b);
    const RelationProfile& p = priors.profiles[r];
    for (std::uint32_t e = 0; e < a.size(); ++e) {
      const double expected = sigmoid(f.embeddings.margin() -
                                      distance(f.embeddings, head, rel, EntityId(e)));
      EXPECT_DOUBLE_EQ(a[e], expected);
      EXPECT_DOUBLE_EQ(a[e], raw.score(head, rel, EntityId(e)));
      if (p.in_range(EntityId(e)) || p.lcw <= 0.9) {
        EXPECT_EQ(b[e], a[e]);
      } else {
        EXPECT_EQ(b[e], 0.0);
      }
    }
  }
}

TEST(LinkScorerTest, RejectsMismatchedDimensions) {
  const Fixture& f = small_kg();
  const RelationPriors priors = analyze_relations(f.store, small_config());
  std::vector<std::optional<TreeEnsemble>> models(priors.profiles.size());
  models[0] = TreeEnsemble(3, 0.1);
  EXPECT_THROW(LinkScorer(f.embeddings, priors.profiles, models, 0.9, true), Error);
}

TEST(AblationRunTest, AllDisabledEqualsBaseline) {
  const Fixture& f = small_kg();
  PipelineConfig c = small_config();
  Ablation all;
  all.relation_inference = all.rcwc = all.lcwa_prediction = true;
  const MetricsReport ablated =
      ablation_run(f.store, f.embeddings, c, all, f.store.test());

  PipelineConfig base = c;
  base.base_negatives = BaseNegativeMode::kNaive;
  RelationPriors priors;
  priors.pair_sets = add_inverse_relations(build_pair_sets(f.store));
  priors.augmented = priors.pair_sets;
  ProfileOptions options;
  options.cooc_threshold = c.rcwc_threshold;
  options.seed = c.seed;
  priors.profiles = build_profiles(priors.augmented, {}, options);
  auto results = train_all_relations(priors, f.embeddings, base);
  std::vector<std::optional<TreeEnsemble>> models;
  for (auto& r : results) models.push_back(std::move(r.ensemble));
  const LinkScorer scorer(f.embeddings, priors.profiles, std::move(models), 0.9, false);
  const MetricsReport manual = evaluate(f.store, scorer.tail_scorer(), f.store.test(), 1);
  EXPECT_EQ(report_json(ablated), report_json(manual));
}

TEST(EvaluateTest, ReportInvariants) {
  const Fixture& f = small_kg();
  const MetricsReport r =
      evaluate(f.store, embedding_scorer(f.embeddings), f.store.test(), 2);
  EXPECT_EQ(r.overall.count, 2 * f.store.test().size());
  EXPECT_LE(r.overall.hits1, r.overall.hits3);
  EXPECT_LE(r.overall.hits3, r.overall.hits10);
  EXPECT_GT(r.overall.mrr, 0.0);
  EXPECT_LE(r.overall.mrr, 1.0);
  EXPECT_GE(r.overall.mr, 1.0);
  EXPECT_LE(r.overall.mr, double(f.store.num_entities()));
}

}  // namespace
}  // namespace kbc
