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


#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "kbc/commands.hpp"
#include "kbc/workdir.hpp"
#include "support/synthetic_kg.hpp"

namespace kbc {
namespace {

namespace fs = std::filesystem;

class CommandsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::SyntheticKgOptions o;
    o.num_types = 3;
    o.entities_per_type = 20;
    o.num_relations = 3;
    o.seed = 9;
    kg_ = testing::make_synthetic_kg(o);
    write_synthetic_kg(kg_, dir_.path() / "data");
  }

  RunConfig config(const std::string& workdir) const {
    RunConfig c = default_run_config();
    c.train_path = dir_.path() / "data" / "train.txt";
    c.valid_path = dir_.path() / "data" / "valid.txt";
    c.test_path = dir_.path() / "data" / "test.txt";
    c.workdir = dir_.path() / workdir;
    c.embedding.kind = EmbeddingKind::kTranslational;
    c.embedding.dim = 8;
    c.embedding.steps = 120;
    c.embedding.batch_size = 64;
    c.embedding.negatives = 8;
    c.embedding.learning_rate = 0.05;
    c.embedding.log_every = 40;
    c.pipeline.negatives_per_positive = 8;
    c.pipeline.gbt.num_estimators = 10;
    c.pipeline.gbt.max_depth = 2;
    c.pipeline.gbt.learning_rate = 0.3;
    set_threads(c, 2);
    set_seed(c, 4);
    c.deterministic = true;
    apply_determinism(c);
    return c;
  }

  static void run_all(const RunConfig& c) {
    std::ostringstream out;
    cmd_prepare(c, out);
    cmd_train_embeddings(c, {}, out);
    cmd_train_classifiers(c, {}, out);
    cmd_evaluate(c, {}, out);
  }

  testing::SyntheticKg kg_;
  testing::TempDir dir_;
};

TEST_F(CommandsTest, EndToEnd) {
  const RunConfig c = config("work");
  std::ostringstream out;
  const DatasetSummary s = cmd_prepare(c, out);
  EXPECT_EQ(s.train, kg_.train.size());
  EXPECT_EQ(s.valid, kg_.valid.size());
  EXPECT_EQ(s.test, kg_.test.size());
  EXPECT_NE(out.str().find("relations with inverses"), std::string::npos);

  cmd_train_embeddings(c, {}, out);
  EXPECT_NE(out.str().find("step 120 loss"), std::string::npos);
  EXPECT_NE(out.str().find("valid MRR"), std::string::npos);

  cmd_train_classifiers(c, {.dump_negatives = true}, out);
  {
    const Workdir wd(c.workdir);
    for (std::uint32_t r = 0; r < 2 * s.relations; ++r) {
      const RelationId rel(r);
      EXPECT_NE(fs::exists(wd.classifier_path(rel)), fs::exists(wd.fallback_path(rel)));
    }
    EXPECT_TRUE(fs::exists(wd.negatives_dir() / "rel_0000.tsv"));
  }

  const MetricsReport report = cmd_evaluate(c, {}, out);
  EXPECT_EQ(report.overall.count, 2 * kg_.test.size());
  EXPECT_GT(report.overall.mrr, 0.0);
  const fs::path reports = c.workdir / "reports";
  for (const char* f : {"metrics.json", "metrics.txt", "per_relation.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(reports / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(read_file(reports / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 4);
  EXPECT_EQ(manifest["deterministic"], true);

  EvaluateOptions ablate;
  ablate.ablation.lcwa_prediction = true;
  ablate.subset = 5;
  const MetricsReport ab = cmd_evaluate(c, ablate, out);
  EXPECT_EQ(ab.overall.count, 10u);
  EXPECT_TRUE(fs::exists(reports / "ablation-lcwa-prediction" / "metrics.json"));

  const std::string& head = kg_.test[0][0];
  const std::string& rel = kg_.test[0][1];
  const auto top = cmd_predict(c, head, rel, 5);
  ASSERT_EQ(top.size(), 5u);
  for (std::size_t i = 1; i < top.size(); ++i) EXPECT_GE(top[i - 1].score, top[i].score);
  const auto all = cmd_predict(c, head, rel, 100000);
  EXPECT_EQ(all.size(), s.entities);
  EXPECT_EQ(cmd_predict(c, head, rel + "^-1", 3).size(), 3u);
  EXPECT_THROW(cmd_predict(c, "no-such-entity", rel, 3), Error);
  EXPECT_THROW(cmd_predict(c, head, "no-such-relation", 3), Error);
}

TEST_F(CommandsTest, RerunIsByteIdentical) {
  const RunConfig a = config("a");
  RunConfig b = config("b");
  set_threads(b, 1);
  run_all(a);
  run_all(b);
  const Workdir wa(a.workdir), wb(b.workdir);
  EXPECT_EQ(read_file(wa.embeddings_path()), read_file(wb.embeddings_path()));
  for (const auto& entry : fs::directory_iterator(wa.classifiers_dir())) {
    const fs::path other = wb.classifiers_dir() / entry.path().filename();
    if (entry.path().filename() == "settings.json") continue;
    EXPECT_EQ(read_file(entry.path()), read_file(other)) << entry.path();
  }
  EXPECT_EQ(read_file(wa.reports_dir() / "metrics.json"),
            read_file(wb.reports_dir() / "metrics.json"));
  EXPECT_EQ(read_file(wa.reports_dir() / "per_relation.csv"),
            read_file(wb.reports_dir() / "per_relation.csv"));
}

TEST_F(CommandsTest, ResumeMatchesUninterruptedRun) {
  const RunConfig full = config("full");
  run_all(full);

  RunConfig part = config("part");
  std::ostringstream out;
  cmd_prepare(part, out);
  part.embedding.steps = 40;
  // Settings exclude the step target, so a longer run resumes.
  cmd_train_embeddings(part, {}, out);
  part.embedding.steps = 120;
  cmd_train_embeddings(part, {}, out);
  EXPECT_NE(out.str().find("resuming embedding training at step 40"), std::string::npos);
  cmd_train_classifiers(part, {}, out);
  {
    const Workdir wd(part.workdir);
    fs::remove(wd.classifier_path(RelationId(0)));
  }
  cmd_train_classifiers(part, {}, out);
  EXPECT_NE(out.str().find("already trained"), std::string::npos);

  const Workdir wf(full.workdir), wp(part.workdir);
  EXPECT_EQ(read_file(wf.embeddings_path()), read_file(wp.embeddings_path()));
  EXPECT_EQ(read_file(wf.classifier_path(RelationId(0))),
            read_file(wp.classifier_path(RelationId(0))));
}

TEST_F(CommandsTest, SettingsMismatchNeedsRestart) {
  RunConfig c = config("work");
  std::ostringstream out;
  cmd_prepare(c, out);
  cmd_train_embeddings(c, {}, out);
  c.embedding.dim = 6;
  EXPECT_THROW(cmd_train_embeddings(c, {}, out), Error);
  cmd_train_embeddings(c, {.restart = true}, out);
  cmd_train_classifiers(c, {}, out);
  c.pipeline.gbt.max_depth = 3;
  EXPECT_THROW(cmd_train_classifiers(c, {}, out), Error);
  cmd_train_classifiers(c, {.restart = true}, out);
}

TEST_F(CommandsTest, MissingStagesAreReported) {
  const RunConfig c = config("work");
  std::ostringstream out;
  EXPECT_THROW(cmd_train_embeddings(c, {}, out), Error);
  cmd_prepare(c, out);
  EXPECT_THROW(cmd_train_classifiers(c, {}, out), Error);
  EXPECT_THROW(cmd_evaluate(c, {}, out), Error);
  RunConfig no_test = c;
  no_test.test_path.clear();
  EXPECT_THROW(cmd_prepare(no_test, out), Error);
}

TEST(WorkdirTest, SchemaAndLock) {
  testing::TempDir dir;
  {
    const Workdir wd(dir.path() / "w");
    EXPECT_EQ(read_file(dir.path() / "w" / "SCHEMA"), std::string(kWorkdirSchema) + "\n");
    EXPECT_THROW(Workdir(dir.path() / "w"), Error);
  }
  EXPECT_NO_THROW(Workdir(dir.path() / "w"));

  write_file_atomic(dir.path() / "other" / "SCHEMA", "kbc-workdir 99\n");
  EXPECT_THROW(Workdir(dir.path() / "other"), Error);
  write_file_atomic(dir.path() / "busy" / "notes.txt", "x");
  EXPECT_THROW(Workdir(dir.path() / "busy"), Error);
}

TEST(WorkdirTest, Sha256) {
  EXPECT_EQ(sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(KBC_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CommandsTest, CliRoundTrip) {
  const fs::path data = dir_.path() / "data";
  const fs::path log = dir_.path() / "log.txt";
  const std::string common =
      "--workdir " + (dir_.path() / "cli").string() + " --seed 3 --threads 1 --deterministic";
  ASSERT_EQ(run_cli(common + " prepare --dataset-dir " + data.string(), log), 0)
      << read_file(log);
  EXPECT_NE(read_file(log).find("entities"), std::string::npos);
  ASSERT_EQ(run_cli(common + " train-embeddings --kind transe --dim 8 --steps 60", log), 0)
      << read_file(log);
  ASSERT_EQ(run_cli(common + " train-classifiers --estimators 6 --depth 2", log), 0)
      << read_file(log);
  ASSERT_EQ(run_cli(common + " evaluate --subset 10", log), 0) << read_file(log);
  EXPECT_NE(read_file(log).find("MRR"), std::string::npos);

  const std::string head = kg_.test[0][0];
  const std::string rel = kg_.test[0][1];
  ASSERT_EQ(run_cli(common + " predict --head " + head + " --relation " + rel + " -k 4", log),
            0)
      << read_file(log);
  std::istringstream lines(read_file(log));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    EXPECT_NE(line.find('\t'), std::string::npos) << line;
    ++count;
  }
  EXPECT_EQ(count, 4);

  EXPECT_EQ(run_cli(common + " predict --head nobody --relation " + rel, log), 1);
  const std::string err = read_file(log);
  EXPECT_EQ(err.rfind("kbc: error: ", 0), 0u) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
  EXPECT_NE(run_cli(common + " evaluate --ablate dropout", log), 0);
  EXPECT_NE(run_cli("--no-such-flag", log), 0);
  EXPECT_EQ(run_cli("--help", log), 0);
}

}  // namespace
}  // namespace kbc
