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
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "kbc/config.hpp"
#include "kbc/pipeline.hpp"
#include "kbc/ranking.hpp"

namespace kbc {

// Counts printed by `prepare`, in dataset-statistics layout.
struct DatasetSummary {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

DatasetSummary summarize_dataset(const TripleStore& store);
std::string format_summary(const DatasetSummary& summary);

// Loads the dataset, runs relation analysis and persists the results.
DatasetSummary cmd_prepare(const RunConfig& config, std::ostream& out);

struct TrainEmbeddingsOptions {
  // Discard an existing model instead of resuming it.
  bool restart = false;
  // Valid triples used for the periodic validation MRR; 0 disables it.
  std::size_t validation_triples = 100;
};

// Trains (or resumes) the embedding model up to config.embedding.steps,
// checkpointing every log interval.
void cmd_train_embeddings(const RunConfig& config,
                          const TrainEmbeddingsOptions& options,
                          std::ostream& out);

struct TrainClassifiersOptions {
  bool dump_negatives = false;
  // Discard existing classifier files instead of resuming.
  bool restart = false;
};

// Writes one classifier or fallback marker per relation id in [0, 2R),
// skipping relations already completed with the same settings.
void cmd_train_classifiers(const RunConfig& config,
                           const TrainClassifiersOptions& options,
                           std::ostream& out);

struct EvaluateOptions {
  Ablation ablation;
  // Evaluate the first N triples only.
  std::optional<std::size_t> subset;
  Split split = Split::kTest;
};

// Writes metrics.json, metrics.txt, per_relation.csv and manifest.json into
// reports/ (reports/ablation-<name>/ for ablations).
MetricsReport cmd_evaluate(const RunConfig& config,
                           const EvaluateOptions& options, std::ostream& out);

struct Prediction {
  std::string tail;
  double score = 0.0;
};

// Top-k tails for (head, relation, ?), by descending score with ties in
// entity-id order. An inverse relation is written as "name^-1".
std::vector<Prediction> cmd_predict(const RunConfig& config,
                                    std::string_view head,
                                    std::string_view relation, std::size_t k);

std::string relation_label(const TripleStore& store, RelationId rel);
RelationId parse_relation_label(const TripleStore& store,
                                std::string_view label);

}  // namespace kbc
