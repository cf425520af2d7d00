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


#include "kbc/config.hpp"

#include <fstream>
#include <functional>
#include <limits>
#include <set>

namespace kbc {
namespace {

using json = nlohmann::json;

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& what) {
  throw Error("config key '" + key + "': " + what);
}

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) bad_value(key, "expected a number");
  return v.get<double>();
}

std::uint64_t as_count(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    bad_value(key, "expected a non-negative integer");
  }
  bad_value(key, "expected an integer");
}

int as_int(const std::string& key, const json& v) {
  const std::uint64_t n = as_count(key, v);
  if (n > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    bad_value(key, "value too large");
  }
  return static_cast<int>(n);
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) bad_value(key, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) bad_value(key, "expected true or false");
  return v.get<bool>();
}

std::string kind_name(EmbeddingKind kind) {
  return kind == EmbeddingKind::kRotational ? "rotate" : "transe";
}

EmbeddingKind parse_kind(const std::string& key, const std::string& s) {
  if (s == "transe") return EmbeddingKind::kTranslational;
  if (s == "rotate") return EmbeddingKind::kRotational;
  bad_value(key, "expected transe or rotate, got '" + s + "'");
}

std::string base_name(BaseNegativeMode m) {
  switch (m) {
    case BaseNegativeMode::kNaive:
      return "naive";
    case BaseNegativeMode::kRcwc:
      return "rcwc";
    case BaseNegativeMode::kAuto:
      break;
  }
  return "auto";
}

std::string rows_name(AdversarialRows m) {
  return m == AdversarialRows::kAllRows ? "all" : "positives-and-adversarial";
}

#define KBC_DOUBLE(key, field)                                              \
  KeySpec{key, [](RunConfig& c, const json& v) { c.field = as_double(key, v); }, \
          [](const RunConfig& c) { return json(c.field); }}
#define KBC_COUNT(key, field)                                                \
  KeySpec{key,                                                              \
          [](RunConfig& c, const json& v) {                                 \
            c.field = static_cast<decltype(c.field)>(as_count(key, v));     \
          },                                                                \
          [](const RunConfig& c) { return json(c.field); }}
#define KBC_INT(key, field)                                                \
  KeySpec{key, [](RunConfig& c, const json& v) { c.field = as_int(key, v); }, \
          [](const RunConfig& c) { return json(c.field); }}

const std::vector<KeySpec>& specs() {
  static const std::vector<KeySpec> table = {
      {"family",
       [](RunConfig& c, const json& v) {
         const std::string f = as_string("family", v);
         if (!f.empty()) family_defaults(f);
         c.family = f;
       },
       [](const RunConfig& c) { return json(c.family); }},
      {"train",
       [](RunConfig& c, const json& v) { c.train_path = as_string("train", v); },
       [](const RunConfig& c) { return json(c.train_path.string()); }},
      {"valid",
       [](RunConfig& c, const json& v) { c.valid_path = as_string("valid", v); },
       [](const RunConfig& c) { return json(c.valid_path.string()); }},
      {"test",
       [](RunConfig& c, const json& v) { c.test_path = as_string("test", v); },
       [](const RunConfig& c) { return json(c.test_path.string()); }},
      {"workdir",
       [](RunConfig& c, const json& v) { c.workdir = as_string("workdir", v); },
       [](const RunConfig& c) { return json(c.workdir.string()); }},
      {"seed",
       [](RunConfig& c, const json& v) { set_seed(c, as_count("seed", v)); },
       [](const RunConfig& c) { return json(c.pipeline.seed); }},
      {"threads",
       [](RunConfig& c, const json& v) { set_threads(c, as_int("threads", v)); },
       [](const RunConfig& c) { return json(c.pipeline.threads); }},
      {"deterministic",
       [](RunConfig& c, const json& v) {
         c.deterministic = as_bool("deterministic", v);
       },
       [](const RunConfig& c) { return json(c.deterministic); }},
      KBC_DOUBLE("subrelation_threshold", pipeline.subrelation_threshold),
      KBC_DOUBLE("rcwc_threshold", pipeline.rcwc_threshold),
      KBC_DOUBLE("lcw_threshold", pipeline.lcw_threshold),
      KBC_COUNT("lcw_folds", pipeline.lcw_folds),
      KBC_COUNT("negatives_per_positive", pipeline.negatives_per_positive),
      KBC_DOUBLE("adversarial_fraction", pipeline.adversarial_fraction),
      KBC_INT("refresh_count", pipeline.refresh_count),
      KBC_DOUBLE("adversarial_threshold", pipeline.adversarial_threshold),
      {"base_negatives",
       [](RunConfig& c, const json& v) {
         const std::string s = as_string("base_negatives", v);
         if (s == "auto") {
           c.pipeline.base_negatives = BaseNegativeMode::kAuto;
         } else if (s == "naive") {
           c.pipeline.base_negatives = BaseNegativeMode::kNaive;
         } else if (s == "rcwc") {
           c.pipeline.base_negatives = BaseNegativeMode::kRcwc;
         } else {
           bad_value("base_negatives", "expected auto, naive or rcwc");
         }
       },
       [](const RunConfig& c) { return json(base_name(c.pipeline.base_negatives)); }},
      KBC_DOUBLE("rcwc_range_fraction", pipeline.rcwc_range_fraction),
      KBC_COUNT("min_positives", pipeline.min_positives),
      {"adversarial_rows",
       [](RunConfig& c, const json& v) {
         const std::string s = as_string("adversarial_rows", v);
         if (s == "positives-and-adversarial") {
           c.pipeline.adversarial_rows = AdversarialRows::kPositivesAndAdversarial;
         } else if (s == "all") {
           c.pipeline.adversarial_rows = AdversarialRows::kAllRows;
         } else {
           bad_value("adversarial_rows",
                     "expected positives-and-adversarial or all");
         }
       },
       [](const RunConfig& c) { return json(rows_name(c.pipeline.adversarial_rows)); }},
      KBC_INT("num_estimators", pipeline.gbt.num_estimators),
      KBC_INT("max_depth", pipeline.gbt.max_depth),
      KBC_DOUBLE("learning_rate", pipeline.gbt.learning_rate),
      KBC_DOUBLE("l2_leaf_penalty", pipeline.gbt.l2_leaf_penalty),
      KBC_DOUBLE("min_split_gain", pipeline.gbt.min_split_gain),
      KBC_DOUBLE("min_child_hessian", pipeline.gbt.min_child_hessian),
      {"embedding_kind",
       [](RunConfig& c, const json& v) {
         c.embedding.kind =
             parse_kind("embedding_kind", as_string("embedding_kind", v));
       },
       [](const RunConfig& c) { return json(kind_name(c.embedding.kind)); }},
      KBC_COUNT("embedding_dim", embedding.dim),
      KBC_DOUBLE("embedding_margin", embedding.margin),
      KBC_DOUBLE("embedding_learning_rate", embedding.learning_rate),
      KBC_COUNT("embedding_batch_size", embedding.batch_size),
      KBC_COUNT("embedding_steps", embedding.steps),
      KBC_COUNT("embedding_negatives", embedding.negatives),
      KBC_DOUBLE("adversarial_temperature", embedding.adversarial_temperature),
      KBC_COUNT("embedding_partitions", embedding.partitions),
      KBC_COUNT("embedding_log_every", embedding.log_every),
  };
  return table;
}

#undef KBC_DOUBLE
#undef KBC_COUNT
#undef KBC_INT

void apply_family(RunConfig& config, const std::string& family) {
  config.family = family;
  if (family.empty()) return;
  const FamilyDefaults d = family_defaults(family);
  config.pipeline.negatives_per_positive = d.negatives_per_positive;
  config.pipeline.gbt.num_estimators = d.num_estimators;
  config.pipeline.gbt.max_depth = d.max_depth;
  config.pipeline.gbt.learning_rate = d.learning_rate;
  config.embedding.dim = d.embedding_dim;
  config.embedding.margin = d.margin;
}

}  // namespace

RunConfig default_run_config(const std::string& family) {
  RunConfig config;
  config.embedding.partitions = 0;
  apply_family(config, family);
  return config;
}

void apply_config(RunConfig& config, const nlohmann::json& object) {
  if (!object.is_object()) throw Error("config must be a JSON object");
  std::set<std::string> known;
  for (const KeySpec& s : specs()) known.insert(s.name);
  for (const auto& [key, value] : object.items()) {
    if (!known.contains(key)) throw Error("unknown config key '" + key + "'");
  }
  if (object.contains("family")) {
    apply_family(config, as_string("family", object.at("family")));
  }
  for (const KeySpec& s : specs()) {
    if (s.name == "family") continue;
    if (object.contains(s.name)) s.set(config, object.at(s.name));
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  nlohmann::json object;
  try {
    object = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config file " + path.string() + ": " + e.what());
  }
  RunConfig config = default_run_config();
  apply_config(config, object);
  validate(config);
  return config;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const KeySpec& s : specs()) out.push_back(s.name);
    return out;
  }();
  return keys;
}

nlohmann::ordered_json config_snapshot(const RunConfig& config) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const KeySpec& s : specs()) out[s.name] = s.get(config);
  return out;
}

void set_seed(RunConfig& config, std::uint64_t seed) {
  config.pipeline.seed = seed;
  config.pipeline.gbt.seed = seed;
  config.embedding.seed = seed;
}

void set_threads(RunConfig& config, int threads) {
  if (threads < 1) throw Error("threads must be >= 1");
  config.pipeline.threads = threads;
  config.pipeline.gbt.threads = threads;
  config.embedding.threads = threads;
}

void apply_determinism(RunConfig& config) {
  if (config.deterministic && config.embedding.partitions == 0) {
    config.embedding.partitions = 8;
  }
}

void validate(const RunConfig& config) {
  validate(config.pipeline);
  validate(config.embedding);
  if (!config.family.empty()) family_defaults(config.family);
}

}  // namespace kbc
