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

#include <filesystem>
#include <string>
#include <string_view>

#include "kbc/types.hpp"

namespace kbc {

inline constexpr std::string_view kWorkdirSchema = "kbc-workdir 1";

// Exclusive handle on a working directory.
//
// Layout:
//   SCHEMA                      schema tag, checked on open
//   .lock                       held while a command runs
//   store/                      vocabularies and id-encoded splits
//   relations/                  pair sets, subrelations, profiles
//   embeddings/model.bin
//   classifiers/rel_NNNN.gbt    or rel_NNNN.fallback
//   negatives/rel_NNNN.tsv      with --dump-negatives
//   reports/
class Workdir {
 public:
  // Creates the directory if needed. Throws if it holds a different schema,
  // is a non-empty directory without a schema tag, or is locked.
  explicit Workdir(std::filesystem::path root);
  ~Workdir();
  Workdir(const Workdir&) = delete;
  Workdir& operator=(const Workdir&) = delete;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path store_dir() const { return root_ / "store"; }
  std::filesystem::path relations_dir() const { return root_ / "relations"; }
  std::filesystem::path embeddings_dir() const { return root_ / "embeddings"; }
  std::filesystem::path embeddings_path() const {
    return embeddings_dir() / "model.bin";
  }
  std::filesystem::path classifiers_dir() const {
    return root_ / "classifiers";
  }
  std::filesystem::path negatives_dir() const { return root_ / "negatives"; }
  std::filesystem::path reports_dir() const { return root_ / "reports"; }
  std::filesystem::path classifier_path(RelationId rel) const;
  std::filesystem::path fallback_path(RelationId rel) const;

 private:
  std::filesystem::path root_;
  std::filesystem::path lock_path_;
};

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace kbc
