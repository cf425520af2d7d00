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


// kbc: command-line front end for the knowledge-base-completion toolkit.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "kbc/commands.hpp"
#include "kbc/config.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::string> workdir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool deterministic = false;
  std::string log_level = "warn";
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge base completion with per-relation boosted classifiers"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "JSON config file (flat key/value)")
      ->check(CLI::ExistingFile);
  app.add_option("--workdir", g.workdir, "working directory");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", g.deterministic,
               "results independent of the thread count");
  app.add_option("--log-level", g.log_level,
                 "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // prepare
  auto* prepare = app.add_subcommand("prepare", "load a dataset and analyse relations");
  std::optional<std::string> train_path, valid_path, test_path, dataset_dir,
      family;
  prepare->add_option("--train", train_path, "train split (h<TAB>r<TAB>t)");
  prepare->add_option("--valid", valid_path, "valid split");
  prepare->add_option("--test", test_path, "test split");
  prepare->add_option("--dataset-dir", dataset_dir,
                      "directory holding train.txt, valid.txt and test.txt");
  app.add_option("--family", family,
                                    "hyperparameter preset: wordnet or freebase")
                         ->check(CLI::IsMember({"wordnet", "freebase"}));

  // train-embeddings
  auto* train_emb =
      app.add_subcommand("train-embeddings", "train the entity embedding model");
  std::optional<std::string> kind;
  std::optional<std::size_t> dim;
  std::optional<std::uint64_t> steps;
  std::optional<double> emb_lr;
  bool restart_emb = false;
  train_emb->add_option("--kind", kind, "transe or rotate")
      ->check(CLI::IsMember({"transe", "rotate"}));
  train_emb->add_option("--dim", dim, "embedding dimension");
  train_emb->add_option("--steps", steps, "total training steps");
  train_emb->add_option("--lr", emb_lr, "learning rate");
  train_emb->add_flag("--restart", restart_emb,
                      "discard an existing model instead of resuming");

  // train-classifiers
  auto* train_cls =
      app.add_subcommand("train-classifiers", "train one classifier per relation");
  bool dump_negatives = false;
  bool restart_cls = false;
  std::optional<int> estimators;
  std::optional<int> depth;
  train_cls->add_flag("--dump-negatives", dump_negatives,
                      "write sampled negatives to negatives/");
  train_cls->add_flag("--restart", restart_cls,
                      "discard existing classifiers instead of resuming");
  train_cls->add_option("--estimators", estimators, "trees per relation");
  train_cls->add_option("--depth", depth, "maximum tree depth");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "filtered ranking evaluation");
  std::vector<std::string> ablate;
  std::optional<std::size_t> subset;
  std::string split = "test";
  eval->add_option("--ablate", ablate,
                   "bypass relation-inference, rcwc or lcwa-prediction");
  eval->add_option("--subset", subset, "evaluate the first N triples only");
  eval->add_option("--split", split, "test or valid")
      ->check(CLI::IsMember({"test", "valid"}));

  // predict
  auto* predict = app.add_subcommand("predict", "rank tails for (head, relation, ?)");
  std::string head, relation;
  std::size_t k = 10;
  predict->add_option("--head", head, "head entity")->required();
  predict->add_option("--relation", relation,
                      "relation, or name^-1 for its inverse")
      ->required();
  predict->add_option("-k", k, "number of tails to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  auto logger = spdlog::stderr_color_mt("kbc");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    kbc::RunConfig config = kbc::default_run_config();
    if (!g.config.empty()) config = kbc::load_run_config(g.config);
    if (family) {
      kbc::apply_config(config, nlohmann::json{{"family", *family}});
    }
    if (g.workdir) config.workdir = *g.workdir;
    if (g.seed) kbc::set_seed(config, *g.seed);
    if (g.threads) kbc::set_threads(config, *g.threads);
    if (g.deterministic) config.deterministic = true;
    if (dataset_dir) {
      const std::filesystem::path dir(*dataset_dir);
      config.train_path = dir / "train.txt";
      config.valid_path = dir / "valid.txt";
      config.test_path = dir / "test.txt";
    }
    if (train_path) config.train_path = *train_path;
    if (valid_path) config.valid_path = *valid_path;
    if (test_path) config.test_path = *test_path;
    if (kind) kbc::apply_config(config, nlohmann::json{{"embedding_kind", *kind}});
    if (dim) config.embedding.dim = *dim;
    if (steps) config.embedding.steps = *steps;
    if (emb_lr) config.embedding.learning_rate = *emb_lr;
    if (estimators) config.pipeline.gbt.num_estimators = *estimators;
    if (depth) config.pipeline.gbt.max_depth = *depth;
    kbc::apply_determinism(config);
    kbc::validate(config);

    if (*prepare) {
      kbc::cmd_prepare(config, std::cout);
    } else if (*train_emb) {
      kbc::TrainEmbeddingsOptions options;
      options.restart = restart_emb;
      kbc::cmd_train_embeddings(config, options, std::cout);
    } else if (*train_cls) {
      kbc::TrainClassifiersOptions options;
      options.dump_negatives = dump_negatives;
      options.restart = restart_cls;
      kbc::cmd_train_classifiers(config, options, std::cout);
    } else if (*eval) {
      kbc::EvaluateOptions options;
      options.ablation = kbc::parse_ablation(ablate);
      options.subset = subset;
      options.split = split == "valid" ? kbc::Split::kValid : kbc::Split::kTest;
      kbc::cmd_evaluate(config, options, std::cout);
    } else if (*predict) {
      for (const auto& p : kbc::cmd_predict(config, head, relation, k)) {
        std::cout << fmt::format("{}\t{}\n", p.tail, p.score);
      }
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "kbc: error: " << msg << "\n";
    return 1;
  }
  return 0;
}
