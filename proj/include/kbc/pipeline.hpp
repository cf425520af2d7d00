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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kbc/embedding.hpp"
#include "kbc/gbt.hpp"
#include "kbc/negative_sampling.hpp"
#include "kbc/ranking.hpp"
#include "kbc/relation_analysis.hpp"
#include "kbc/triple_store.hpp"

namespace kbc {

enum class BaseNegativeMode { kAuto, kNaive, kRcwc };

enum class AdversarialRows {
  // Later stages train on positives plus the mined negatives.
  kPositivesAndAdversarial,
  // Later stages keep the base negatives alongside the mined ones.
  kAllRows,
};

// Pipeline modules bypassed for an ablation run.
struct Ablation {
  bool relation_inference = false;
  bool rcwc = false;
  bool lcwa_prediction = false;

  bool any() const { return relation_inference || rcwc || lcwa_prediction; }
  std::string name() const;
};

// Accepts "relation-inference", "rcwc" and "lcwa-prediction".
Ablation parse_ablation(std::span<const std::string> names);

struct PipelineConfig {
  double subrelation_threshold = 0.8;
  double rcwc_threshold = 1.0;
  double lcw_threshold = 0.9;
  std::size_t lcw_folds = 5;
  std::size_t negatives_per_positive = 32;
  GbtConfig gbt;
  // Fraction of trees trained on mined adversarial negatives.
  double adversarial_fraction = 0.5;
  int refresh_count = 1;
  // Predicted probability at which a negative counts as misclassified.
  double adversarial_threshold = 0.5;
  BaseNegativeMode base_negatives = BaseNegativeMode::kAuto;
  // kAuto picks rcwc when |range| < fraction * |E|.
  double rcwc_range_fraction = 0.5;
  std::size_t min_positives = 4;
  AdversarialRows adversarial_rows = AdversarialRows::kAllRows;
  Ablation disabled;
  std::uint64_t seed = 0;
  int threads = 1;
  // Keep sampled negatives in training results (for dumps and tests).
  bool record_negatives = false;
};

void validate(const PipelineConfig& config);

// Defaults per dataset family: negatives, estimators, depth, learning rate,
// embedding dimension and margin.
struct FamilyDefaults {
  std::size_t negatives_per_positive;
  int num_estimators;
  int max_depth;
  double learning_rate;
  std::size_t embedding_dim;
  double margin;
};

FamilyDefaults family_defaults(std::string_view family);

// Relation priors derived from the train split.
struct RelationPriors {
  // Original pair sets over [0, 2R).
  std::vector<PairSet> pair_sets;
  std::vector<SubrelationLink> links;
  // Classifier positives: pair sets after subrelation augmentation.
  std::vector<PairSet> augmented;
  // Computed on the augmented sets.
  std::vector<RelationProfile> profiles;
};

RelationPriors analyze_relations(const TripleStore& store,
                                 const PipelineConfig& config);

// Trees trained before the first adversarial refresh.
int stage_one_trees(int num_estimators, double adversarial_fraction);

NegativeStrategy choose_base_strategy(const RelationProfile& profile,
                                      std::size_t num_entities,
                                      const PipelineConfig& config);

struct RelationTrainingResult {
  RelationId rel;
  // Empty when the relation has too few positives; scored by the fallback.
  std::optional<TreeEnsemble> ensemble;
  NegativeStrategy base_strategy = NegativeStrategy::kNaive;
  std::size_t positives = 0;
  std::size_t base_negatives = 0;
  std::size_t adversarial_negatives = 0;
  double stage_one_logloss = 0.0;
  double final_logloss = 0.0;
  // Filled when config.record_negatives is set.
  std::vector<NegativeBatch> base_batches;
  std::vector<NegativeBatch> adversarial_batches;
};

// Stage one boosts on positives plus base negatives; each refresh then mines
// a fresh base pool with the partial ensemble and boosts with the
// misclassified negatives added (or, with kPositivesAndAdversarial, swapped
// in for the base negatives).
RelationTrainingResult train_relation(RelationId rel,
                                      const PairSet& positives,
                                      const RelationProfile& profile,
                                      const EmbeddingModel& embeddings,
                                      const PipelineConfig& config);

using RelationProgress = std::function<void(const RelationTrainingResult&)>;

// Trains every relation in [0, 2R), in parallel across relations.
std::vector<RelationTrainingResult> train_all_relations(
    const RelationPriors& priors, const EmbeddingModel& embeddings,
    const PipelineConfig& config, const RelationProgress& progress = {});

// 1{t in range(r)} * y when lcw(r) > lcw_threshold, otherwise y.
double lcwa_score(const RelationProfile& profile, EntityId tail, double y,
                  double lcw_threshold);

// Score used where no classifier exists: sigma(margin - d_r(h, t)).
double fallback_score(const EmbeddingModel& embeddings, EntityId head,
                      RelationId rel, EntityId tail);

// Link-prediction scorer over all relations: classifier probability (or the
// fallback), gated by the relation's lcw index.
class LinkScorer {
 public:
  LinkScorer(const EmbeddingModel& embeddings,
             std::span<const RelationProfile> profiles,
             std::vector<std::optional<TreeEnsemble>> models,
             double lcw_threshold, bool lcwa_enabled);

  void score_tails(EntityId head, RelationId rel, std::span<double> out) const;
  double score(EntityId head, RelationId rel, EntityId tail) const;
  TailScorer tail_scorer() const;
  bool has_classifier(RelationId rel) const;

 private:
  const EmbeddingModel& embeddings_;
  std::span<const RelationProfile> profiles_;
  std::vector<std::optional<TreeEnsemble>> models_;
  double lcw_threshold_;
  bool lcwa_enabled_;
};

// Ranks candidate tails by -d_r(h, t) of the embedding model alone.
TailScorer embedding_scorer(const EmbeddingModel& embeddings);

// Filtered tail ranking over both directions of every triple.
MetricsReport evaluate(const TripleStore& store, const TailScorer& scorer,
                       std::span<const Triple> triples, int threads);

// Reruns relation analysis, classifier training and evaluation with the
// `disabled` modules bypassed.
MetricsReport ablation_run(const TripleStore& store,
                           const EmbeddingModel& embeddings,
                           PipelineConfig config, const Ablation& disabled,
                           std::span<const Triple> triples);

}  // namespace kbc
