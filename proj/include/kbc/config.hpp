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

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "kbc/embedding.hpp"
#include "kbc/pipeline.hpp"

namespace kbc {

// Settings of one batch run. Loaded from a flat JSON object whose keys are
// listed in docs of `config_keys()`; command-line flags are applied on top.
struct RunConfig {
  // "wordnet", "freebase" or "" for the library defaults.
  std::string family;
  std::filesystem::path train_path;
  std::filesystem::path valid_path;
  std::filesystem::path test_path;
  std::filesystem::path workdir = "kbc-work";
  bool deterministic = false;
  EmbeddingTrainConfig embedding;
  PipelineConfig pipeline;
};

// Library defaults with the family presets applied.
RunConfig default_run_config(const std::string& family = "");

// Applies a flat JSON object. A "family" key is applied first and resets every
// family-controlled value; the remaining keys override it. Unknown keys,
// wrong types and out-of-range values throw Error.
void apply_config(RunConfig& config, const nlohmann::json& object);

RunConfig load_run_config(const std::filesystem::path& path);

// Keys accepted by apply_config, in snapshot order.
const std::vector<std::string>& config_keys();

// Every key with its effective value; round-trips through apply_config.
nlohmann::ordered_json config_snapshot(const RunConfig& config);

// Sets the seed of every stage.
void set_seed(RunConfig& config, std::uint64_t seed);
void set_threads(RunConfig& config, int threads);

// Deterministic runs pin the embedding gradient partition count so the
// result does not depend on the thread count.
void apply_determinism(RunConfig& config);

void validate(const RunConfig& config);

}  // namespace kbc
