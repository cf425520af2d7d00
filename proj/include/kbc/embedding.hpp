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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "kbc/triple_store.hpp"
#include "kbc/types.hpp"

namespace kbc {

enum class EmbeddingKind : std::uint32_t {
  // Real vectors, d(h, t) = ||h + r - t||.
  kTranslational = 0,
  // Complex vectors with unit-modulus relations, d(h, t) = ||h o r - t||^2.
  kRotational = 1,
};

// Entity and relation parameters of a distance-based model.
//
// Translational entity rows hold d reals. Rotational entity rows hold 2d
// reals: the d real parts followed by the d imaginary parts. Relation rows
// hold d reals in both cases: the translation vector, or the rotation phases
// in [0, 2*pi).
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(EmbeddingKind kind, std::size_t num_entities,
                 std::size_t num_relations, std::size_t dim, double margin);

  EmbeddingKind kind() const { return kind_; }
  std::size_t num_entities() const { return num_entities_; }
  // Forward relations only; inverse ids are resolved by swapping h and t.
  std::size_t num_relations() const { return num_relations_; }
  std::size_t dim() const { return dim_; }
  double margin() const { return margin_; }
  std::size_t entity_stride() const {
    return kind_ == EmbeddingKind::kRotational ? 2 * dim_ : dim_;
  }
  std::uint64_t steps_done() const { return steps_done_; }
  void set_steps_done(std::uint64_t steps) { steps_done_ = steps; }

  std::span<const double> entity(EntityId e) const;
  std::span<double> entity(EntityId e);
  std::span<const double> relation(RelationId r) const;
  std::span<double> relation(RelationId r);

  std::vector<double>& entity_data() { return entities_; }
  const std::vector<double>& entity_data() const { return entities_; }
  std::vector<double>& relation_data() { return relations_; }
  const std::vector<double>& relation_data() const { return relations_; }

  friend bool operator==(const EmbeddingModel&,
                         const EmbeddingModel&) = default;

 private:
  EmbeddingKind kind_ = EmbeddingKind::kTranslational;
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::size_t dim_ = 0;
  double margin_ = 0.0;
  std::uint64_t steps_done_ = 0;
  std::vector<double> entities_;
  std::vector<double> relations_;
};

double transe_distance(const EmbeddingModel& model, EntityId h, RelationId r,
                       EntityId t);
double rotate_distance(const EmbeddingModel& model, EntityId h, RelationId r,
                       EntityId t);
// Dispatches on the model kind. An inverse id r + R scores d_r(t, h).
double distance(const EmbeddingModel& model, EntityId h, RelationId r,
                EntityId t);

// softmax_i(alpha * (margin - d_i)).
std::vector<double> adversarial_weights(std::span<const double> distances,
                                        double margin, double alpha);
std::vector<double> adversarial_weights(const EmbeddingModel& model,
                                        std::span<const Triple> negatives,
                                        double alpha);

// -log sigma(margin - d) - sum_i p_i log sigma(d_i - margin).
double nll_loss(double positive_distance,
                std::span<const double> negative_distances, double margin,
                double alpha);
double nll_loss(const EmbeddingModel& model, const Triple& positive,
                std::span<const Triple> negatives, double alpha);

// Dense gradient with the model's parameter layout.
struct ModelGradient {
  std::vector<double> entities;
  std::vector<double> relations;

  explicit ModelGradient(const EmbeddingModel& model)
      : entities(model.entity_data().size(), 0.0),
        relations(model.relation_data().size(), 0.0) {}
};

// Adds scale * dL/dtheta to `grad` and returns the loss. The adversarial
// weights are held constant (no gradient flows through them).
double accumulate_nll_gradient(const EmbeddingModel& model,
                               const Triple& positive,
                               std::span<const Triple> negatives, double alpha,
                               double scale, ModelGradient& grad);

struct EmbeddingTrainConfig {
  EmbeddingKind kind = EmbeddingKind::kRotational;
  std::size_t dim = 50;
  double learning_rate = 0.5;
  std::size_t batch_size = 256;
  std::uint64_t steps = 1000;
  std::size_t negatives = 64;
  double adversarial_temperature = 1.0;
  double margin = 6.0;
  std::uint64_t seed = 0;
  int threads = 1;
  // Gradient partitions per step. Fixed partitions make results independent
  // of the thread count; 0 means one partition per thread.
  std::size_t partitions = 8;
  // Steps between progress callbacks; 0 disables them.
  std::uint64_t log_every = 0;
};

void validate(const EmbeddingTrainConfig& config);

// Called every `log_every` steps with (step, mean loss since last call).
using TrainProgress = std::function<void(std::uint64_t, double)>;

EmbeddingModel initialize_embeddings(const TripleStore& store,
                                     const EmbeddingTrainConfig& config);

// Minibatch SGD on the self-adversarial negative log-likelihood. Continues
// from `model.steps_done()` up to `config.steps`; the randomness of each step
// depends only on (seed, step), so resumed runs match uninterrupted ones.
// Returns the mean loss of every step run.
std::vector<double> continue_training(EmbeddingModel& model,
                                      const TripleStore& store,
                                      const EmbeddingTrainConfig& config,
                                      const TrainProgress& progress = {});

EmbeddingModel train_embeddings(const TripleStore& store,
                                const EmbeddingTrainConfig& config,
                                const TrainProgress& progress = {});

std::size_t feature_dim(const EmbeddingModel& model);
// [h; t]: entity row of h then entity row of t.
std::vector<double> feature_vector(const EmbeddingModel& model, EntityId h,
                                   EntityId t);
void write_features(const EmbeddingModel& model, EntityId h, EntityId t,
                    std::span<float> out);

// Binary model file, little-endian:
//   0  char[8] magic "KBCEMB\0\1"
//   8  u32 format version (1)
//  12  u32 kind (0 translational, 1 rotational)
//  16  u64 entity count
//  24  u64 relation count
//  32  u64 dimension d
//  40  f64 margin
//  48  u32 layout (0 real rows, 1 complex rows: d real parts then d imaginary)
//  52  u32 reserved (0)
//  56  u64 training steps completed
//  64  f64[entities * stride] entity matrix, row-major
//      f64[relations * d] relation matrix, row-major
void save_embeddings(const std::filesystem::path& path,
                     const EmbeddingModel& model);
EmbeddingModel load_embeddings(const std::filesystem::path& path);

}  // namespace kbc
