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

#include "kbc/triple_store.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <spdlog/spdlog.h>

namespace kbc {
namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Splits on single TAB characters, keeping empty fields.
std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::uint32_t parse_id(std::string_view text, const std::string& source,
                       std::size_t line_no) {
  std::uint32_t value = 0;
  if (text.empty()) throw ParseError(source, line_no, "empty id");
  for (char c : text) {
    if (c < '0' || c > '9') {
      throw ParseError(source, line_no, "bad id '" + std::string(text) + "'");
    }
    value = value * 10 + static_cast<std::uint32_t>(c - '0');
  }
  return value;
}

// Reads one split, assigning vocabulary ids on first appearance.
std::vector<Triple> read_split(const std::filesystem::path& path,
                               Vocabulary& entities, Vocabulary& relations) {
  std::ifstream in = open_input(path);
  std::vector<Triple> triples;
  std::set<Triple> seen;
  std::size_t duplicates = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(path.string(), line_no,
                       "expected 3 tab-separated fields, got " +
                           std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ParseError(path.string(), line_no, "empty field");
    }
    const Triple triple{EntityId(entities.add(fields[0])),
                        RelationId(relations.add(fields[1])),
                        EntityId(entities.add(fields[2]))};
    if (seen.insert(triple).second) {
      triples.push_back(triple);
    } else {
      ++duplicates;
    }
  }
  if (duplicates > 0) {
    spdlog::info("{}: dropped {} duplicate triples", path.string(),
                 duplicates);
  }
  return triples;
}

void write_vocabulary(const std::filesystem::path& path,
                      const Vocabulary& vocab) {
  std::ofstream out = open_output(path);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << i << '\t' << vocab.name(static_cast<std::uint32_t>(i)) << '\n';
  }
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path.string(), line_no, "expected id<TAB>name");
    }
    const std::uint32_t id =
        parse_id(std::string_view(line).substr(0, tab), path.string(), line_no);
    if (id != vocab.size()) {
      throw ParseError(path.string(), line_no, "ids must be dense and ordered");
    }
    vocab.add(std::string_view(line).substr(tab + 1));
    if (vocab.size() != id + 1u) {
      throw ParseError(path.string(), line_no, "duplicate name");
    }
  }
  return vocab;
}

void write_id_triples(const std::filesystem::path& path,
                      const std::vector<Triple>& triples) {
  std::ofstream out = open_output(path);
  for (const Triple& t : triples) {
    out << t.head.value() << '\t' << t.rel.value() << '\t' << t.tail.value()
        << '\n';
  }
}

std::vector<Triple> read_id_triples(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<Triple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(path.string(), line_no, "expected 3 id fields");
    }
    triples.push_back(
        Triple{EntityId(parse_id(fields[0], path.string(), line_no)),
               RelationId(parse_id(fields[1], path.string(), line_no)),
               EntityId(parse_id(fields[2], path.string(), line_no))});
  }
  return triples;
}

}  // namespace

std::uint32_t Vocabulary::add(std::string_view name) {
  auto [it, inserted] = index_.try_emplace(
      std::string(name), static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.emplace_back(name);
  return it->second;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TripleStore::TripleStore(Vocabulary entities, Vocabulary relations,
                         std::vector<Triple> train, std::vector<Triple> valid,
                         std::vector<Triple> test)
    : entities_(std::move(entities)),
      relations_(std::move(relations)),
      train_(std::move(train)),
      valid_(std::move(valid)),
      test_(std::move(test)) {
  for (const auto* split : {&train_, &valid_, &test_}) {
    for (const Triple& t : *split) {
      if (t.head.value() >= entities_.size() ||
          t.tail.value() >= entities_.size() ||
          t.rel.value() >= relations_.size()) {
        throw Error("triple id outside vocabulary bounds");
      }
    }
  }
  build_index();
}

const std::vector<Triple>& TripleStore::split(Split which) const {
  switch (which) {
    case Split::kTrain:
      return train_;
    case Split::kValid:
      return valid_;
    case Split::kTest:
      return test_;
  }
  return train_;
}

std::uint64_t TripleStore::key(EntityId head, RelationId rel) const {
  return static_cast<std::uint64_t>(rel.value()) * entities_.size() +
         head.value();
}

void TripleStore::build_index() {
  const std::size_t num_rel = relations_.size();
  // Drop later-split copies so the splits stay pairwise disjoint.
  std::set<Triple> seen;
  std::size_t overlaps = 0;
  for (auto* split : {&train_, &valid_, &test_}) {
    std::erase_if(*split, [&](const Triple& t) {
      const bool dup = !seen.insert(t).second;
      overlaps += dup ? 1 : 0;
      return dup;
    });
  }
  if (overlaps > 0) {
    spdlog::warn("dropped {} triples repeated across splits", overlaps);
  }
  for (const auto* split : {&train_, &valid_, &test_}) {
    for (const Triple& t : *split) {
      tails_[key(t.head, t.rel)].push_back(t.tail);
      tails_[key(t.tail, inverse_relation(t.rel, num_rel))].push_back(t.head);
    }
  }
  for (auto& [k, tails] : tails_) std::sort(tails.begin(), tails.end());
}

bool TripleStore::contains(const Triple& triple) const {
  const auto tails = known_tails(triple.head, triple.rel);
  return std::binary_search(tails.begin(), tails.end(), triple.tail);
}

std::span<const EntityId> TripleStore::known_tails(EntityId head,
                                                   RelationId rel) const {
  const auto it = tails_.find(key(head, rel));
  if (it == tails_.end()) return {};
  return it->second;
}

void TripleStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_vocabulary(dir / "entities.tsv", entities_);
  write_vocabulary(dir / "relations.tsv", relations_);
  write_id_triples(dir / "train.ids", train_);
  write_id_triples(dir / "valid.ids", valid_);
  write_id_triples(dir / "test.ids", test_);
}

TripleStore TripleStore::load_saved(const std::filesystem::path& dir) {
  return TripleStore(read_vocabulary(dir / "entities.tsv"),
                     read_vocabulary(dir / "relations.tsv"),
                     read_id_triples(dir / "train.ids"),
                     read_id_triples(dir / "valid.ids"),
                     read_id_triples(dir / "test.ids"));
}

TripleStore load_dataset(const std::filesystem::path& train_path,
                         const std::filesystem::path& valid_path,
                         const std::filesystem::path& test_path) {
  Vocabulary entities;
  Vocabulary relations;
  auto train = read_split(train_path, entities, relations);
  if (train.empty()) throw Error(train_path.string() + ": empty train split");
  auto valid = read_split(valid_path, entities, relations);
  auto test = read_split(test_path, entities, relations);
  return TripleStore(std::move(entities), std::move(relations),
                     std::move(train), std::move(valid), std::move(test));
}

bool PairSet::contains(EntityPair pair) const {
  return std::binary_search(pairs.begin(), pairs.end(), pair);
}

std::span<const EntityPair> PairSet::with_head(EntityId head) const {
  const auto lo = std::lower_bound(pairs.begin(), pairs.end(),
                                   EntityPair{head, EntityId(0)});
  auto hi = lo;
  while (hi != pairs.end() && hi->head == head) ++hi;
  return {lo, hi};
}

PairSet make_pair_set(RelationId rel, std::vector<EntityPair> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return PairSet{rel, std::move(pairs)};
}

std::vector<PairSet> build_pair_sets(const TripleStore& store) {
  std::vector<std::vector<EntityPair>> buckets(store.num_relations());
  for (const Triple& t : store.train()) {
    buckets[t.rel.value()].push_back(EntityPair{t.head, t.tail});
  }
  std::vector<PairSet> sets;
  sets.reserve(buckets.size());
  for (std::size_t r = 0; r < buckets.size(); ++r) {
    sets.push_back(make_pair_set(RelationId(static_cast<std::uint32_t>(r)),
                                 std::move(buckets[r])));
  }
  return sets;
}

std::vector<PairSet> add_inverse_relations(std::span<const PairSet> forward) {
  const std::size_t num_rel = forward.size();
  std::vector<PairSet> sets(forward.begin(), forward.end());
  sets.reserve(2 * num_rel);
  for (std::size_t r = 0; r < num_rel; ++r) {
    std::vector<EntityPair> swapped;
    swapped.reserve(forward[r].size());
    for (const EntityPair& p : forward[r].pairs) {
      swapped.push_back(EntityPair{p.tail, p.head});
    }
    sets.push_back(make_pair_set(
        inverse_relation(RelationId(static_cast<std::uint32_t>(r)), num_rel),
        std::move(swapped)));
  }
  return sets;
}

void save_pair_sets(const std::filesystem::path& path,
                    std::span<const PairSet> sets) {
  std::ofstream out = open_output(path);
  for (const PairSet& set : sets) {
    for (const EntityPair& p : set.pairs) {
      out << set.rel.value() << '\t' << p.head.value() << '\t'
          << p.tail.value() << '\n';
    }
  }
}

std::vector<PairSet> load_pair_sets(const std::filesystem::path& path,
                                    std::size_t num_relations) {
  std::vector<std::vector<EntityPair>> buckets(num_relations);
  for (const Triple& t : read_id_triples(path)) {
    // Columns are rel, head, tail.
    const std::uint32_t rel = t.head.value();
    if (rel >= num_relations) {
      throw Error(path.string() + ": relation id out of range");
    }
    buckets[rel].push_back(
        EntityPair{EntityId(t.rel.value()), EntityId(t.tail.value())});
  }
  std::vector<PairSet> sets;
  for (std::size_t r = 0; r < num_relations; ++r) {
    sets.push_back(make_pair_set(RelationId(static_cast<std::uint32_t>(r)),
                                 std::move(buckets[r])));
  }
  return sets;
}

}  // namespace kbc
