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


#include <fstream>

#include <gtest/gtest.h>

#include "kbc/config.hpp"
#include "support/synthetic_kg.hpp"

namespace kbc {
namespace {

using nlohmann::json;

TEST(RunConfigTest, FamilyPresets) {
  const RunConfig wn = default_run_config("wordnet");
  EXPECT_EQ(wn.pipeline.negatives_per_positive, 32u);
  EXPECT_EQ(wn.pipeline.gbt.num_estimators, 1500);
  EXPECT_EQ(wn.pipeline.gbt.max_depth, 3);
  EXPECT_EQ(wn.embedding.dim, 500u);
  EXPECT_EQ(wn.embedding.partitions, 0u);
  const RunConfig fb = default_run_config("freebase");
  EXPECT_EQ(fb.pipeline.negatives_per_positive, 64u);
  EXPECT_EQ(fb.pipeline.gbt.max_depth, 5);
  EXPECT_EQ(fb.embedding.dim, 1000u);
}

TEST(RunConfigTest, FamilyAppliedBeforeOtherKeys) {
  RunConfig c = default_run_config();
  apply_config(c, json{{"num_estimators", 7}, {"family", "freebase"}});
  EXPECT_EQ(c.pipeline.gbt.num_estimators, 7);
  EXPECT_EQ(c.pipeline.gbt.max_depth, 5);
  EXPECT_EQ(c.family, "freebase");
}

TEST(RunConfigTest, RejectsBadInput) {
  RunConfig c = default_run_config();
  EXPECT_THROW(apply_config(c, json{{"num_trees", 5}}), Error);
  EXPECT_THROW(apply_config(c, json{{"max_depth", "deep"}}), Error);
  EXPECT_THROW(apply_config(c, json{{"embedding_kind", "distmult"}}), Error);
  EXPECT_THROW(apply_config(c, json{{"family", "yago"}}), Error);
  EXPECT_THROW(apply_config(c, json::array()), Error);
  RunConfig bad = default_run_config();
  apply_config(bad, json{{"adversarial_fraction", 1.0}});
  EXPECT_THROW(validate(bad), Error);
}

TEST(RunConfigTest, SnapshotRoundTrips) {
  RunConfig c = default_run_config("wordnet");
  apply_config(c, json{{"seed", 17},
                       {"lcw_threshold", 0.8},
                       {"embedding_kind", "transe"},
                       {"base_negatives", "rcwc"},
                       {"adversarial_rows", "positives-and-adversarial"},
                       {"train", "a/train.txt"}});
  const auto snap = config_snapshot(c);
  std::vector<std::string> keys;
  for (const auto& [k, v] : snap.items()) keys.push_back(k);
  EXPECT_EQ(keys, config_keys());

  RunConfig back = default_run_config();
  apply_config(back, json::parse(snap.dump()));
  EXPECT_EQ(config_snapshot(back).dump(), snap.dump());
  EXPECT_EQ(back.pipeline.seed, 17u);
  EXPECT_EQ(back.embedding.seed, 17u);
  EXPECT_EQ(back.pipeline.gbt.seed, 17u);
  EXPECT_EQ(back.embedding.kind, EmbeddingKind::kTranslational);
  EXPECT_EQ(back.pipeline.adversarial_rows, AdversarialRows::kPositivesAndAdversarial);
}

TEST(RunConfigTest, LoadsFileWithComments) {
  testing::TempDir dir;
  const auto path = dir.path() / "run.json";
  std::ofstream(path) << "{\n  // small run\n  \"threads\": 3,\n  \"max_depth\": 2\n}\n";
  const RunConfig c = load_run_config(path);
  EXPECT_EQ(c.pipeline.threads, 3);
  EXPECT_EQ(c.embedding.threads, 3);
  EXPECT_EQ(c.pipeline.gbt.max_depth, 2);
  std::ofstream(path) << "{ \"threads\": ";
  EXPECT_THROW(load_run_config(path), Error);
  EXPECT_THROW(load_run_config(dir.path() / "missing.json"), Error);
}

TEST(RunConfigTest, DeterminismPinsPartitions) {
  RunConfig c = default_run_config();
  apply_determinism(c);
  EXPECT_EQ(c.embedding.partitions, 0u);
  c.deterministic = true;
  apply_determinism(c);
  EXPECT_EQ(c.embedding.partitions, 8u);
  c.embedding.partitions = 3;
  apply_determinism(c);
  EXPECT_EQ(c.embedding.partitions, 3u);
}

TEST(RunConfigTest, SetThreadsRejectsZero) {
  RunConfig c = default_run_config();
  EXPECT_THROW(set_threads(c, 0), Error);
  set_threads(c, 2);
  EXPECT_EQ(c.pipeline.gbt.threads, 2);
}

}  // namespace
}  // namespace kbc
