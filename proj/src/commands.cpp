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


#include "kbc/commands.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "kbc/parallel.hpp"
#include "kbc/workdir.hpp"

namespace kbc {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

void require_file(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) {
    throw Error("missing " + path.string() + " (" + hint + ")");
  }
}

std::string store_fingerprint(const Workdir& wd) {
  std::string all;
  for (const char* name : {"entities.tsv", "relations.tsv", "train.ids",
                           "valid.ids", "test.ids"}) {
    const fs::path p = wd.store_dir() / name;
    require_file(p, "run prepare first");
    all += sha256_file(p);
  }
  return sha256_hex(all);
}

TripleStore load_prepared_store(const Workdir& wd) {
  require_file(wd.store_dir() / "entities.tsv", "run prepare first");
  return TripleStore::load_saved(wd.store_dir());
}

EmbeddingModel load_checked_embeddings(const Workdir& wd,
                                       const TripleStore& store) {
  require_file(wd.embeddings_path(), "run train-embeddings first");
  EmbeddingModel model = load_embeddings(wd.embeddings_path());
  if (model.num_entities() != store.num_entities() ||
      model.num_relations() != store.num_relations()) {
    throw Error("embedding model " + wd.embeddings_path().string() +
                " does not match the prepared dataset");
  }
  return model;
}

std::vector<RelationProfile> load_checked_profiles(const Workdir& wd,
                                                   const TripleStore& store) {
  const fs::path path = wd.relations_dir() / "profiles.json";
  require_file(path, "run prepare first");
  auto profiles = load_profiles(path);
  if (profiles.size() != 2 * store.num_relations()) {
    throw Error(path.string() + " does not match the prepared dataset");
  }
  return profiles;
}

// Writes `settings` to `path`, or checks it against the stored copy.
// Returns false on a mismatch.
bool settings_match(const fs::path& path, const ojson& settings) {
  if (!fs::exists(path)) return true;
  return read_file(path) == settings.dump(2) + "\n";
}

void write_json(const fs::path& path, const ojson& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

ojson analysis_settings(const RunConfig& config) {
  return {{"subrelation_threshold", config.pipeline.subrelation_threshold},
          {"rcwc_threshold", config.pipeline.rcwc_threshold},
          {"lcw_folds", config.pipeline.lcw_folds},
          {"seed", config.pipeline.seed}};
}

std::size_t resolved_partitions(const EmbeddingTrainConfig& c) {
  return c.partitions == 0 ? static_cast<std::size_t>(std::max(1, c.threads))
                           : c.partitions;
}

ojson embedding_settings(const RunConfig& config, const std::string& store_fp) {
  const EmbeddingTrainConfig& e = config.embedding;
  return {{"store", store_fp},
          {"embedding_kind", config_snapshot(config)["embedding_kind"]},
          {"embedding_dim", e.dim},
          {"embedding_margin", e.margin},
          {"embedding_learning_rate", e.learning_rate},
          {"embedding_batch_size", e.batch_size},
          {"embedding_negatives", e.negatives},
          {"adversarial_temperature", e.adversarial_temperature},
          {"embedding_partitions", resolved_partitions(e)},
          {"seed", e.seed}};
}

ojson classifier_settings(const RunConfig& config, const Workdir& wd) {
  const ojson snap = config_snapshot(config);
  ojson s = {{"embeddings", sha256_file(wd.embeddings_path())},
             {"augmented", sha256_file(wd.relations_dir() / "augmented.tsv")},
             {"profiles", sha256_file(wd.relations_dir() / "profiles.json")}};
  for (const char* key :
       {"seed", "rcwc_threshold", "negatives_per_positive",
        "adversarial_fraction", "refresh_count", "adversarial_threshold",
        "base_negatives", "rcwc_range_fraction", "min_positives",
        "adversarial_rows", "num_estimators", "max_depth", "learning_rate",
        "l2_leaf_penalty", "min_split_gain", "min_child_hessian"}) {
    s[key] = snap[key];
  }
  return s;
}

std::vector<std::optional<TreeEnsemble>> load_classifiers(
    const Workdir& wd, std::size_t num_slots) {
  std::vector<std::optional<TreeEnsemble>> models(num_slots);
  for (std::size_t r = 0; r < num_slots; ++r) {
    const RelationId rel(static_cast<std::uint32_t>(r));
    if (fs::exists(wd.classifier_path(rel))) {
      models[r] = load_ensemble(wd.classifier_path(rel));
    } else if (!fs::exists(wd.fallback_path(rel))) {
      throw Error("no classifier for relation id " + std::to_string(r) +
                  " in " + wd.classifiers_dir().string() +
                  " (run train-classifiers first)");
    }
  }
  return models;
}

std::string classifiers_fingerprint(const Workdir& wd, std::size_t num_slots) {
  std::string all;
  for (std::size_t r = 0; r < num_slots; ++r) {
    const RelationId rel(static_cast<std::uint32_t>(r));
    const fs::path p = fs::exists(wd.classifier_path(rel))
                           ? wd.classifier_path(rel)
                           : wd.fallback_path(rel);
    all += p.filename().string() + ":" + sha256_file(p) + "\n";
  }
  return sha256_hex(all);
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      break;
  }
  return "test";
}

}  // namespace

std::string relation_label(const TripleStore& store, RelationId rel) {
  const std::size_t num_rel = store.num_relations();
  if (is_inverse(rel, num_rel)) {
    return store.relations().name(inverse_relation(rel, num_rel).value()) +
           "^-1";
  }
  return store.relations().name(rel.value());
}

RelationId parse_relation_label(const TripleStore& store,
                                std::string_view label) {
  if (auto id = store.relations().find(label)) return RelationId(*id);
  constexpr std::string_view kSuffix = "^-1";
  if (label.size() > kSuffix.size() && label.ends_with(kSuffix)) {
    label.remove_suffix(kSuffix.size());
    if (auto id = store.relations().find(label)) {
      return inverse_relation(RelationId(*id), store.num_relations());
    }
  }
  throw Error("unknown relation '" + std::string(label) + "'");
}

DatasetSummary summarize_dataset(const TripleStore& store) {
  return {store.num_entities(), store.num_relations(), store.train().size(),
          store.valid().size(), store.test().size()};
}

std::string format_summary(const DatasetSummary& s) {
  std::string out = fmt::format("{:>10} {:>10} {:>10} {:>10} {:>10}\n",
                                "entities", "relations", "train", "valid",
                                "test");
  out += fmt::format("{:>10} {:>10} {:>10} {:>10} {:>10}\n", s.entities,
                     s.relations, s.train, s.valid, s.test);
  return out;
}

DatasetSummary cmd_prepare(const RunConfig& config, std::ostream& out) {
  validate(config);
  if (config.train_path.empty() || config.valid_path.empty() ||
      config.test_path.empty()) {
    throw Error("prepare needs train, valid and test dataset paths");
  }
  for (const fs::path& p :
       {config.train_path, config.valid_path, config.test_path}) {
    if (!fs::is_regular_file(p)) {
      throw Error("missing dataset file " + p.string());
    }
  }
  TripleStore store =
      load_dataset(config.train_path, config.valid_path, config.test_path);
  Workdir wd(config.workdir);

  ojson inputs = ojson::object();
  inputs["train"] = {{"path", config.train_path.string()},
                     {"sha256", sha256_file(config.train_path)}};
  inputs["valid"] = {{"path", config.valid_path.string()},
                     {"sha256", sha256_file(config.valid_path)}};
  inputs["test"] = {{"path", config.test_path.string()},
                    {"sha256", sha256_file(config.test_path)}};
  ojson record = {{"format", "kbc-prepare 1"},
                  {"inputs", inputs},
                  {"analysis", analysis_settings(config)}};
  const fs::path record_path = wd.relations_dir() / "prepare.json";
  if (fs::exists(record_path)) {
    const ojson old = ojson::parse(read_file(record_path));
    bool same = old.value("analysis", ojson()) == record["analysis"];
    for (const char* split : {"train", "valid", "test"}) {
      same = same && old["inputs"][split]["sha256"] == inputs[split]["sha256"];
    }
    if (!same && (fs::exists(wd.embeddings_path()) ||
                  fs::exists(wd.classifiers_dir()))) {
      throw Error("working directory " + wd.root().string() +
                  " holds models built from different inputs or analysis "
                  "settings; use a fresh working directory");
    }
  }

  store.save(wd.store_dir());
  const RelationPriors priors = analyze_relations(store, config.pipeline);
  fs::create_directories(wd.relations_dir());
  save_pair_sets(wd.relations_dir() / "pairs.tsv", priors.pair_sets);
  save_pair_sets(wd.relations_dir() / "augmented.tsv", priors.augmented);
  save_subrelations(wd.relations_dir() / "subrelations.json", priors.links);
  save_profiles(wd.relations_dir() / "profiles.json", priors.profiles);
  write_json(record_path, record);

  const DatasetSummary summary = summarize_dataset(store);
  std::size_t gated = 0;
  for (const auto& p : priors.profiles) {
    if (p.lcw > config.pipeline.lcw_threshold) ++gated;
  }
  out << format_summary(summary);
  out << fmt::format("relations with inverses: {}\n",
                     2 * store.num_relations());
  out << fmt::format("subrelation links: {}\n", priors.links.size());
  out << fmt::format("relations with lcw > {}: {}\n",
                     config.pipeline.lcw_threshold, gated);
  return summary;
}

void cmd_train_embeddings(const RunConfig& config,
                          const TrainEmbeddingsOptions& options,
                          std::ostream& out) {
  validate(config);
  Workdir wd(config.workdir);
  const TripleStore store = load_prepared_store(wd);
  const ojson settings = embedding_settings(config, store_fingerprint(wd));
  const fs::path settings_path = wd.embeddings_dir() / "settings.json";

  EmbeddingModel model;
  if (fs::exists(wd.embeddings_path()) && !options.restart) {
    if (!settings_match(settings_path, settings)) {
      throw Error("existing embedding model was trained with different "
                  "settings; pass --restart to discard it");
    }
    model = load_checked_embeddings(wd, store);
    out << fmt::format("resuming embedding training at step {}\n",
                       model.steps_done());
  } else {
    model = initialize_embeddings(store, config.embedding);
  }
  write_json(settings_path, settings);

  const std::uint64_t target = config.embedding.steps;
  const std::uint64_t chunk =
      config.embedding.log_every > 0
          ? config.embedding.log_every
          : std::max<std::uint64_t>(1, target / 10);
  const std::vector<Triple>& valid = store.valid();
  const std::size_t n_valid = std::min(options.validation_triples, valid.size());
  auto checkpoint = [&] {
    fs::path tmp = wd.embeddings_path();
    tmp += ".tmp";
    save_embeddings(tmp, model);
    fs::rename(tmp, wd.embeddings_path());
  };
  if (model.steps_done() >= target) {
    out << fmt::format("embedding model already at step {} (target {})\n",
                       model.steps_done(), target);
    if (!fs::exists(wd.embeddings_path())) checkpoint();
    return;
  }
  while (model.steps_done() < target) {
    EmbeddingTrainConfig step_config = config.embedding;
    step_config.steps = std::min(target, model.steps_done() + chunk);
    const std::vector<double> losses =
        continue_training(model, store, step_config);
    checkpoint();
    const double mean_loss =
        losses.empty() ? 0.0
                       : std::accumulate(losses.begin(), losses.end(), 0.0) /
                             static_cast<double>(losses.size());
    std::string line = fmt::format("step {} loss {:.6f}", model.steps_done(),
                                   mean_loss);
    if (n_valid > 0) {
      const MetricsReport r =
          evaluate(store, embedding_scorer(model),
                   std::span<const Triple>(valid.data(), n_valid),
                   config.embedding.threads);
      line += fmt::format(" valid MRR {:.4f} ({} triples)", r.overall.mrr,
                          n_valid);
    }
    spdlog::info("{}", line);
    out << line << "\n";
  }
}

void cmd_train_classifiers(const RunConfig& config,
                           const TrainClassifiersOptions& options,
                           std::ostream& out) {
  validate(config);
  Workdir wd(config.workdir);
  const TripleStore store = load_prepared_store(wd);
  const EmbeddingModel model = load_checked_embeddings(wd, store);
  const std::size_t slots = 2 * store.num_relations();
  require_file(wd.relations_dir() / "augmented.tsv", "run prepare first");
  const std::vector<PairSet> augmented =
      load_pair_sets(wd.relations_dir() / "augmented.tsv", slots);
  const std::vector<RelationProfile> profiles =
      load_checked_profiles(wd, store);

  const ojson settings = classifier_settings(config, wd);
  const fs::path settings_path = wd.classifiers_dir() / "settings.json";
  if (options.restart) {
    fs::remove_all(wd.classifiers_dir());
    fs::remove_all(wd.negatives_dir());
  } else if (!settings_match(settings_path, settings)) {
    throw Error("existing classifiers were trained with different settings "
                "or inputs; pass --restart to discard them");
  }
  write_json(settings_path, settings);

  std::vector<std::size_t> pending;
  for (std::size_t r = 0; r < slots; ++r) {
    const RelationId rel(static_cast<std::uint32_t>(r));
    if (!fs::exists(wd.classifier_path(rel)) &&
        !fs::exists(wd.fallback_path(rel))) {
      pending.push_back(r);
    }
  }
  if (pending.size() < slots) {
    out << fmt::format("resuming: {} of {} relations already trained\n",
                       slots - pending.size(), slots);
  }
  if (options.dump_negatives) fs::create_directories(wd.negatives_dir());

  PipelineConfig per_relation = config.pipeline;
  per_relation.gbt.threads = 1;
  per_relation.record_negatives = options.dump_negatives;
  std::mutex out_mu;
  std::size_t done = slots - pending.size();
  parallel_for(pending.size(), config.pipeline.threads, [&](std::size_t i) {
    const RelationId rel(static_cast<std::uint32_t>(pending[i]));
    RelationTrainingResult result =
        train_relation(rel, augmented[rel.value()], profiles[rel.value()],
                       model, per_relation);
    if (options.dump_negatives) {
      std::vector<NegativeBatch> batches = std::move(result.base_batches);
      for (auto& b : result.adversarial_batches) {
        batches.push_back(std::move(b));
      }
      const fs::path path =
          wd.negatives_dir() / fmt::format("rel_{:04}.tsv", rel.value());
      save_negative_batches(path, batches);
    }
    std::string line;
    if (result.ensemble) {
      write_file_atomic(wd.classifier_path(rel),
                        serialize_ensemble(*result.ensemble, rel.value()));
      line = fmt::format(
          "{} positives {} base {} ({}) adversarial {} logloss {:.5f} -> "
          "{:.5f}",
          relation_label(store, rel), result.positives, result.base_negatives,
          to_string(result.base_strategy), result.adversarial_negatives,
          result.stage_one_logloss, result.final_logloss);
    } else {
      write_file_atomic(wd.fallback_path(rel),
                        fmt::format("fallback\npositives {}\nmin_positives {}\n",
                                    result.positives,
                                    config.pipeline.min_positives));
      line = fmt::format("{} positives {}: fallback scoring",
                         relation_label(store, rel), result.positives);
    }
    std::lock_guard lock(out_mu);
    ++done;
    spdlog::info("[{}/{}] relation {}", done, slots, line);
    out << fmt::format("[{}/{}] {}\n", done, slots, line);
  });
}

MetricsReport cmd_evaluate(const RunConfig& config,
                           const EvaluateOptions& options, std::ostream& out) {
  validate(config);
  Workdir wd(config.workdir);
  const TripleStore store = load_prepared_store(wd);
  const EmbeddingModel model = load_checked_embeddings(wd, store);
  const std::size_t slots = 2 * store.num_relations();
  const std::vector<RelationProfile> profiles =
      load_checked_profiles(wd, store);

  const std::vector<Triple>& all = store.split(options.split);
  const std::size_t n =
      options.subset ? std::min(*options.subset, all.size()) : all.size();
  const std::span<const Triple> triples(all.data(), n);
  if (triples.empty()) throw Error("no triples to evaluate");

  const Ablation& ab = options.ablation;
  MetricsReport report;
  ojson artifacts = {{"store", store_fingerprint(wd)},
                     {"embeddings", sha256_file(wd.embeddings_path())},
                     {"profiles",
                      sha256_file(wd.relations_dir() / "profiles.json")}};
  if (!ab.relation_inference && !ab.rcwc) {
    auto models = load_classifiers(wd, slots);
    const auto fallbacks =
        std::count_if(models.begin(), models.end(),
                      [](const auto& m) { return !m.has_value(); });
    if (fallbacks > 0) {
      spdlog::info("{} of {} relation ids use the embedding fallback scorer",
                   fallbacks, slots);
    }
    artifacts["classifiers"] = classifiers_fingerprint(wd, slots);
    const LinkScorer scorer(model, profiles, std::move(models),
                            config.pipeline.lcw_threshold,
                            !ab.lcwa_prediction);
    report = evaluate(store, scorer.tail_scorer(), triples,
                      config.pipeline.threads);
  } else {
    spdlog::info("ablation {}: retraining classifiers in memory", ab.name());
    report = ablation_run(store, model, config.pipeline, ab, triples);
  }

  const fs::path dir = ab.any() ? wd.reports_dir() / ("ablation-" + ab.name())
                                : wd.reports_dir();
  fs::create_directories(dir);
  write_file_atomic(dir / "metrics.json", report_json(report));
  write_file_atomic(dir / "metrics.txt", report_table(report));
  write_file_atomic(dir / "per_relation.csv", report_csv(report, store));

  ojson inputs = ojson::object();
  const fs::path record_path = wd.relations_dir() / "prepare.json";
  if (fs::exists(record_path)) {
    inputs = ojson::parse(read_file(record_path))["inputs"];
  }
  ojson manifest = {{"tool", "kbc-toolkit"},
                    {"version", kVersion},
                    {"command", "evaluate"},
                    {"split", split_name(options.split)},
                    {"subset", options.subset ? ojson(*options.subset)
                                              : ojson(nullptr)},
                    {"ablation", ab.name()},
                    {"seed", config.pipeline.seed},
                    {"deterministic", config.deterministic},
                    {"config", config_snapshot(config)},
                    {"inputs", inputs},
                    {"artifacts", artifacts}};
  write_json(dir / "manifest.json", manifest);
  out << report_table(report);
  return report;
}

std::vector<Prediction> cmd_predict(const RunConfig& config,
                                    std::string_view head,
                                    std::string_view relation, std::size_t k) {
  validate(config);
  Workdir wd(config.workdir);
  const TripleStore store = load_prepared_store(wd);
  const auto head_id = store.entities().find(head);
  if (!head_id) throw Error("unknown entity '" + std::string(head) + "'");
  const RelationId rel = parse_relation_label(store, relation);
  const EmbeddingModel model = load_checked_embeddings(wd, store);
  const std::vector<RelationProfile> profiles =
      load_checked_profiles(wd, store);

  std::vector<std::optional<TreeEnsemble>> models(2 * store.num_relations());
  if (fs::exists(wd.classifier_path(rel))) {
    models[rel.value()] = load_ensemble(wd.classifier_path(rel));
  } else if (!fs::exists(wd.fallback_path(rel))) {
    throw Error("no classifier for relation '" + relation_label(store, rel) +
                "' (run train-classifiers first)");
  }
  const LinkScorer scorer(model, profiles, std::move(models),
                          config.pipeline.lcw_threshold, true);
  std::vector<double> scores(store.num_entities());
  scorer.score_tails(EntityId(*head_id), rel, scores);

  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t top = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top),
                    order.end(), [&](std::uint32_t a, std::uint32_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  std::vector<Prediction> result;
  for (std::size_t i = 0; i < top; ++i) {
    result.push_back({store.entities().name(order[i]), scores[order[i]]});
  }
  return result;
}

}  // namespace kbc
