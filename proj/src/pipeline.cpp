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

#include "kbc/pipeline.hpp"

#include <cmath>
#include <mutex>

#include <spdlog/spdlog.h>

#include "kbc/math.hpp"
#include "kbc/parallel.hpp"
#include "kbc/rng.hpp"

namespace kbc {
namespace {

NegativeBatch sample_base(NegativeStrategy strategy, const PairSet& positives,
                          EntityPair positive, const RelationProfile& profile,
                          std::size_t num_entities,
                          const PipelineConfig& config, Rng& rng) {
  if (strategy == NegativeStrategy::kRcwc) {
    return rcwc_negatives(positives, positive, config.negatives_per_positive,
                          profile, config.rcwc_threshold, num_entities, rng);
  }
  return naive_negatives(positives, positive, config.negatives_per_positive,
                         num_entities, rng);
}

void add_pairs(LabeledMatrix& matrix, const EmbeddingModel& embeddings,
               std::span<const EntityPair> pairs, double label,
               std::vector<float>& row) {
  for (const EntityPair& p : pairs) {
    write_features(embeddings, p.head, p.tail, row);
    matrix.add_row(row, label);
  }
}

LabeledMatrix build_matrix(const EmbeddingModel& embeddings,
                           const PairSet& positives,
                           std::span<const NegativeBatch> negative_sets,
                           std::span<const NegativeBatch> extra_sets = {}) {
  LabeledMatrix matrix(feature_dim(embeddings));
  std::size_t rows = positives.size();
  for (const auto& b : negative_sets) rows += b.pairs.size();
  for (const auto& b : extra_sets) rows += b.pairs.size();
  matrix.reserve(rows);
  std::vector<float> row(feature_dim(embeddings));
  add_pairs(matrix, embeddings, positives.pairs, 1.0, row);
  for (const auto& b : negative_sets) {
    add_pairs(matrix, embeddings, b.pairs, 0.0, row);
  }
  for (const auto& b : extra_sets) add_pairs(matrix, embeddings, b.pairs, 0.0, row);
  return matrix;
}

}  // namespace

std::string Ablation::name() const {
  std::string out;
  auto add = [&](bool on, const char* n) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += n;
  };
  add(relation_inference, "relation-inference");
  add(rcwc, "rcwc");
  add(lcwa_prediction, "lcwa-prediction");
  return out.empty() ? "none" : out;
}

Ablation parse_ablation(std::span<const std::string> names) {
  Ablation a;
  for (const std::string& n : names) {
    if (n == "relation-inference") {
      a.relation_inference = true;
    } else if (n == "rcwc") {
      a.rcwc = true;
    } else if (n == "lcwa-prediction") {
      a.lcwa_prediction = true;
    } else {
      throw Error("unknown ablation module '" + n +
                  "' (expected relation-inference, rcwc or lcwa-prediction)");
    }
  }
  return a;
}

void validate(const PipelineConfig& config) {
  validate(config.gbt);
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(std::string(name) + " must be in [0, 1]");
    }
  };
  unit(config.subrelation_threshold, "subrelation_threshold");
  unit(config.lcw_threshold, "lcw_threshold");
  unit(config.adversarial_threshold, "adversarial_threshold");
  unit(config.rcwc_range_fraction, "rcwc_range_fraction");
  if (!(config.rcwc_threshold >= 0.0)) {
    throw Error("rcwc_threshold must be >= 0");
  }
  if (!(config.adversarial_fraction >= 0.0 &&
        config.adversarial_fraction < 1.0)) {
    throw Error("adversarial_fraction must be in [0, 1)");
  }
  if (config.refresh_count < 0) throw Error("refresh_count must be >= 0");
  if (config.lcw_folds < 2) throw Error("lcw_folds must be >= 2");
  if (config.negatives_per_positive < 1) {
    throw Error("negatives_per_positive must be >= 1");
  }
}

FamilyDefaults family_defaults(std::string_view family) {
  if (family == "freebase") return {64, 1000, 5, 0.1, 1000, 12.0};
  if (family == "wordnet") return {32, 1500, 3, 0.1, 500, 6.0};
  throw Error("unknown dataset family '" + std::string(family) +
              "' (expected freebase or wordnet)");
}

RelationPriors analyze_relations(const TripleStore& store,
                                 const PipelineConfig& config) {
  RelationPriors priors;
  priors.pair_sets = add_inverse_relations(build_pair_sets(store));
  if (!config.disabled.relation_inference) {
    priors.links =
        detect_subrelations(priors.pair_sets, config.subrelation_threshold);
    priors.augmented = augment_positives(priors.pair_sets, priors.links);
  } else {
    priors.augmented = priors.pair_sets;
  }
  ProfileOptions options;
  options.cooc_threshold = config.rcwc_threshold;
  options.lcw_folds = config.lcw_folds;
  options.seed = config.seed;
  priors.profiles = build_profiles(priors.augmented, priors.links, options,
                                   config.threads);
  return priors;
}

int stage_one_trees(int num_estimators, double adversarial_fraction) {
  const auto adversarial = static_cast<int>(
      std::llround(adversarial_fraction * static_cast<double>(num_estimators)));
  return num_estimators - adversarial;
}

NegativeStrategy choose_base_strategy(const RelationProfile& profile,
                                      std::size_t num_entities,
                                      const PipelineConfig& config) {
  if (config.disabled.rcwc) return NegativeStrategy::kNaive;
  switch (config.base_negatives) {
    case BaseNegativeMode::kNaive:
      return NegativeStrategy::kNaive;
    case BaseNegativeMode::kRcwc:
      return NegativeStrategy::kRcwc;
    case BaseNegativeMode::kAuto:
      break;
  }
  return static_cast<double>(profile.range.size()) <
                 config.rcwc_range_fraction * static_cast<double>(num_entities)
             ? NegativeStrategy::kRcwc
             : NegativeStrategy::kNaive;
}

RelationTrainingResult train_relation(RelationId rel,
                                      const PairSet& positives,
                                      const RelationProfile& profile,
                                      const EmbeddingModel& embeddings,
                                      const PipelineConfig& config) {
  RelationTrainingResult result;
  result.rel = rel;
  result.positives = positives.size();
  if (positives.size() < config.min_positives) return result;

  const std::size_t num_entities = embeddings.num_entities();
  const NegativeStrategy base = choose_base_strategy(profile, num_entities,
                                                     config);
  result.base_strategy = base;

  Rng rng = derive_rng(config.seed, {0xba5e, rel.value(), 0});
  std::vector<NegativeBatch> base_batches;
  base_batches.reserve(positives.size());
  for (const EntityPair& p : positives.pairs) {
    base_batches.push_back(sample_base(base, positives, p, profile,
                                       num_entities, config, rng));
    result.base_negatives += base_batches.back().pairs.size();
  }

  GbtConfig gbt = config.gbt;
  const int stage_one = stage_one_trees(gbt.num_estimators,
                                        config.adversarial_fraction);
  EnsembleTrainer trainer(gbt, feature_dim(embeddings));
  trainer.set_matrix(build_matrix(embeddings, positives, base_batches));
  trainer.boost(stage_one);
  result.stage_one_logloss = trainer.training_logloss();

  const int remaining = gbt.num_estimators - stage_one;
  const int rounds = remaining > 0 ? std::max(config.refresh_count, 1) : 0;
  std::vector<float> row(feature_dim(embeddings));
  for (int round = 0; round < rounds; ++round) {
    const int trees = remaining / rounds + (round < remaining % rounds ? 1 : 0);
    if (config.refresh_count == 0) {
      trainer.boost(trees);
      continue;
    }
    Rng pool_rng = derive_rng(
        config.seed, {0xba5e, rel.value(), static_cast<std::uint64_t>(round) + 1});
    std::vector<NegativeBatch> mined;
    std::size_t mined_count = 0;
    std::vector<double> scores;
    for (const EntityPair& p : positives.pairs) {
      const NegativeBatch pool =
          sample_base(base, positives, p, profile, num_entities, config,
                      pool_rng);
      scores.resize(pool.pairs.size());
      for (std::size_t i = 0; i < pool.pairs.size(); ++i) {
        write_features(embeddings, pool.pairs[i].head, pool.pairs[i].tail, row);
        scores[i] = predict(trainer.ensemble(), std::span<const float>(row));
      }
      mined.push_back(adversarial_negatives(pool, scores,
                                            config.adversarial_threshold,
                                            config.negatives_per_positive));
      mined_count += mined.back().pairs.size();
    }
    if (mined_count == 0) {
      spdlog::debug("relation {}: no misclassified negatives in refresh {}",
                    rel.value(), round);
      trainer.boost(trees);
      continue;
    }
    result.adversarial_negatives += mined_count;
    if (config.adversarial_rows == AdversarialRows::kAllRows) {
      trainer.set_matrix(build_matrix(embeddings, positives, base_batches, mined));
    } else {
      trainer.set_matrix(build_matrix(embeddings, positives, mined));
    }
    trainer.boost(trees);
    if (config.record_negatives) {
      for (auto& b : mined) result.adversarial_batches.push_back(std::move(b));
    }
  }
  result.final_logloss = trainer.training_logloss();
  if (config.record_negatives) result.base_batches = std::move(base_batches);
  result.ensemble = trainer.release();
  return result;
}

std::vector<RelationTrainingResult> train_all_relations(
    const RelationPriors& priors, const EmbeddingModel& embeddings,
    const PipelineConfig& config, const RelationProgress& progress) {
  validate(config);
  const std::size_t n = priors.augmented.size();
  std::vector<RelationTrainingResult> results(n);
  PipelineConfig per_relation = config;
  // Parallelism is across relations; each tree grows on one thread.
  per_relation.gbt.threads = 1;
  std::mutex progress_mu;
  parallel_for(n, config.threads, [&](std::size_t r) {
    results[r] = train_relation(RelationId(static_cast<std::uint32_t>(r)),
                                priors.augmented[r], priors.profiles[r],
                                embeddings, per_relation);
    if (progress) {
      std::lock_guard lock(progress_mu);
      progress(results[r]);
    }
  });
  return results;
}

double lcwa_score(const RelationProfile& profile, EntityId tail, double y,
                  double lcw_threshold) {
  if (profile.lcw > lcw_threshold) return profile.in_range(tail) ? y : 0.0;
  return y;
}

double fallback_score(const EmbeddingModel& embeddings, EntityId head,
                      RelationId rel, EntityId tail) {
  return sigmoid(embeddings.margin() - distance(embeddings, head, rel, tail));
}

LinkScorer::LinkScorer(const EmbeddingModel& embeddings,
                       std::span<const RelationProfile> profiles,
                       std::vector<std::optional<TreeEnsemble>> models,
                       double lcw_threshold, bool lcwa_enabled)
    : embeddings_(embeddings),
      profiles_(profiles),
      models_(std::move(models)),
      lcw_threshold_(lcw_threshold),
      lcwa_enabled_(lcwa_enabled) {
  if (profiles_.size() != models_.size()) {
    throw Error("LinkScorer: profile and model counts differ");
  }
  for (const auto& m : models_) {
    if (m && m->feature_dim() != feature_dim(embeddings_)) {
      throw Error("LinkScorer: classifier feature dimension does not match "
                  "the embedding model");
    }
  }
}

bool LinkScorer::has_classifier(RelationId rel) const {
  return models_.at(rel.value()).has_value();
}

void LinkScorer::score_tails(EntityId head, RelationId rel,
                             std::span<double> out) const {
  const std::size_t num_entities = embeddings_.num_entities();
  if (out.size() != num_entities) throw Error("score_tails: size mismatch");
  const auto& model = models_.at(rel.value());
  const RelationProfile& profile = profiles_[rel.value()];
  if (model) {
    const std::size_t stride = embeddings_.entity_stride();
    std::vector<float> row(2 * stride);
    const auto hv = embeddings_.entity(head);
    for (std::size_t k = 0; k < stride; ++k) row[k] = static_cast<float>(hv[k]);
    for (std::size_t e = 0; e < num_entities; ++e) {
      const auto tv = embeddings_.entity(EntityId(static_cast<std::uint32_t>(e)));
      for (std::size_t k = 0; k < stride; ++k) {
        row[stride + k] = static_cast<float>(tv[k]);
      }
      out[e] = sigmoid(model->margin(row));
    }
  } else {
    for (std::size_t e = 0; e < num_entities; ++e) {
      out[e] = fallback_score(embeddings_, head, rel,
                              EntityId(static_cast<std::uint32_t>(e)));
    }
  }
  if (!lcwa_enabled_) return;
  for (std::size_t e = 0; e < num_entities; ++e) {
    out[e] = lcwa_score(profile, EntityId(static_cast<std::uint32_t>(e)),
                        out[e], lcw_threshold_);
  }
}

double LinkScorer::score(EntityId head, RelationId rel, EntityId tail) const {
  const auto& model = models_.at(rel.value());
  double y = 0.0;
  if (model) {
    std::vector<float> row(feature_dim(embeddings_));
    write_features(embeddings_, head, tail, row);
    y = predict(*model, std::span<const float>(row));
  } else {
    y = fallback_score(embeddings_, head, rel, tail);
  }
  if (!lcwa_enabled_) return y;
  return lcwa_score(profiles_[rel.value()], tail, y, lcw_threshold_);
}

TailScorer LinkScorer::tail_scorer() const {
  return [this](EntityId head, RelationId rel, std::span<double> out) {
    score_tails(head, rel, out);
  };
}

TailScorer embedding_scorer(const EmbeddingModel& embeddings) {
  return [&embeddings](EntityId head, RelationId rel, std::span<double> out) {
    for (std::size_t e = 0; e < out.size(); ++e) {
      out[e] = -distance(embeddings, head, rel,
                         EntityId(static_cast<std::uint32_t>(e)));
    }
  };
}

MetricsReport evaluate(const TripleStore& store, const TailScorer& scorer,
                       std::span<const Triple> triples, int threads) {
  const auto queries = both_direction_queries(triples, store.num_relations());
  const auto ranks = rank_queries(queries, store, scorer, threads);
  return build_report(ranks, triples.size());
}

MetricsReport ablation_run(const TripleStore& store,
                           const EmbeddingModel& embeddings,
                           PipelineConfig config, const Ablation& disabled,
                           std::span<const Triple> triples) {
  config.disabled = disabled;
  const RelationPriors priors = analyze_relations(store, config);
  auto results = train_all_relations(priors, embeddings, config);
  std::vector<std::optional<TreeEnsemble>> models;
  models.reserve(results.size());
  for (auto& r : results) models.push_back(std::move(r.ensemble));
  const LinkScorer scorer(embeddings, priors.profiles, std::move(models),
                          config.lcw_threshold, !disabled.lcwa_prediction);
  return evaluate(store, scorer.tail_scorer(), triples, config.threads);
}

}  // namespace kbc
