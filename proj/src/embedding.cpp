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

#include "kbc/embedding.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "kbc/math.hpp"
#include "kbc/parallel.hpp"
#include "kbc/rng.hpp"

namespace kbc {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::array<char, 8> kMagic = {'K', 'B', 'C', 'E', 'M', 'B', '\0', '\1'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "model files are written in native little-endian order");

// Resolves an inverse relation id to its forward id with h and t swapped.
struct Oriented {
  EntityId h;
  RelationId r;
  EntityId t;
};

Oriented orient(const EmbeddingModel& model, EntityId h, RelationId r,
                EntityId t) {
  if (is_inverse(r, model.num_relations())) {
    return {t, inverse_relation(r, model.num_relations()), h};
  }
  return {h, r, t};
}

void require_kind(const EmbeddingModel& model, EmbeddingKind kind,
                  const char* op) {
  if (model.kind() != kind) {
    throw Error(std::string(op) + ": embedding kind mismatch");
  }
}

double transe_forward(const EmbeddingModel& model, const Oriented& o) {
  const auto h = model.entity(o.h);
  const auto r = model.relation(o.r);
  const auto t = model.entity(o.t);
  double sq = 0.0;
  for (std::size_t k = 0; k < model.dim(); ++k) {
    const double v = h[k] + r[k] - t[k];
    sq += v * v;
  }
  return std::sqrt(sq);
}

double rotate_forward(const EmbeddingModel& model, const Oriented& o) {
  const std::size_t d = model.dim();
  const auto h = model.entity(o.h);
  const auto phase = model.relation(o.r);
  const auto t = model.entity(o.t);
  double sq = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double c = std::cos(phase[k]);
    const double s = std::sin(phase[k]);
    const double re = h[k] * c - h[d + k] * s - t[k];
    const double im = h[k] * s + h[d + k] * c - t[d + k];
    sq += re * re + im * im;
  }
  return sq;
}

// Row-addressed gradient storage touched only where a sample lands.
class SparseGradient {
 public:
  SparseGradient(std::size_t entity_stride, std::size_t relation_stride)
      : entity_stride_(entity_stride), relation_stride_(relation_stride) {}

  double* entity_row(EntityId e) {
    return row(entity_rows_, entity_data_, e.value(), entity_stride_);
  }
  double* relation_row(RelationId r) {
    return row(relation_rows_, relation_data_, r.value(), relation_stride_);
  }

  const std::unordered_map<std::uint32_t, std::size_t>& entity_rows() const {
    return entity_rows_;
  }
  const std::unordered_map<std::uint32_t, std::size_t>& relation_rows() const {
    return relation_rows_;
  }
  const double* entity_at(std::size_t offset) const {
    return entity_data_.data() + offset;
  }
  const double* relation_at(std::size_t offset) const {
    return relation_data_.data() + offset;
  }

 private:
  static double* row(std::unordered_map<std::uint32_t, std::size_t>& rows,
                     std::vector<double>& data, std::uint32_t id,
                     std::size_t stride) {
    auto [it, inserted] = rows.try_emplace(id, data.size());
    if (inserted) data.resize(data.size() + stride, 0.0);
    return data.data() + it->second;
  }

  std::size_t entity_stride_;
  std::size_t relation_stride_;
  std::unordered_map<std::uint32_t, std::size_t> entity_rows_;
  std::unordered_map<std::uint32_t, std::size_t> relation_rows_;
  std::vector<double> entity_data_;
  std::vector<double> relation_data_;
};

class DenseSink {
 public:
  DenseSink(const EmbeddingModel& model, ModelGradient& grad)
      : model_(model), grad_(grad) {}
  double* entity_row(EntityId e) {
    return grad_.entities.data() + e.value() * model_.entity_stride();
  }
  double* relation_row(RelationId r) {
    return grad_.relations.data() + r.value() * model_.dim();
  }

 private:
  const EmbeddingModel& model_;
  ModelGradient& grad_;
};

// Adds coef * d(distance)/d(theta) for one oriented triple.
template <typename Sink>
void add_distance_gradient(const EmbeddingModel& model, const Oriented& o,
                           double coef, Sink& sink) {
  const std::size_t d = model.dim();
  const auto h = model.entity(o.h);
  const auto rel = model.relation(o.r);
  const auto t = model.entity(o.t);
  // Creating the tail row may move the head row; make both exist first.
  sink.entity_row(o.h);
  sink.entity_row(o.t);
  if (model.kind() == EmbeddingKind::kTranslational) {
    const double norm = transe_forward(model, o);
    if (norm == 0.0) return;
    double* gh = sink.entity_row(o.h);
    double* gr = sink.relation_row(o.r);
    double* gt = sink.entity_row(o.t);
    for (std::size_t k = 0; k < d; ++k) {
      const double v = coef * (h[k] + rel[k] - t[k]) / norm;
      gh[k] += v;
      gr[k] += v;
      gt[k] -= v;
    }
    return;
  }
  double* gh = sink.entity_row(o.h);
  double* gr = sink.relation_row(o.r);
  double* gt = sink.entity_row(o.t);
  for (std::size_t k = 0; k < d; ++k) {
    const double c = std::cos(rel[k]);
    const double s = std::sin(rel[k]);
    const double a = h[k];
    const double b = h[d + k];
    const double re = a * c - b * s - t[k];
    const double im = a * s + b * c - t[d + k];
    gh[k] += coef * 2.0 * (re * c + im * s);
    gh[d + k] += coef * 2.0 * (-re * s + im * c);
    gt[k] -= coef * 2.0 * re;
    gt[d + k] -= coef * 2.0 * im;
    gr[k] += coef * 2.0 * (re * (-a * s - b * c) + im * (a * c - b * s));
  }
}

template <typename Sink>
double nll_gradient(const EmbeddingModel& model, const Triple& positive,
                    std::span<const Triple> negatives, double alpha,
                    double scale, Sink& sink,
                    std::vector<double>& scratch) {
  const double margin = model.margin();
  const double pos_d = distance(model, positive.head, positive.rel,
                                positive.tail);
  scratch.resize(negatives.size());
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    scratch[i] = distance(model, negatives[i].head, negatives[i].rel,
                          negatives[i].tail);
  }
  const auto weights = adversarial_weights(scratch, margin, alpha);
  double loss = -log_sigmoid(margin - pos_d);
  // dL/dd for the positive is sigma(d - margin); for negative i it is
  // -p_i sigma(margin - d_i).
  add_distance_gradient(
      model, orient(model, positive.head, positive.rel, positive.tail),
      scale * sigmoid(pos_d - margin), sink);
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    loss -= weights[i] * log_sigmoid(scratch[i] - margin);
    add_distance_gradient(
        model,
        orient(model, negatives[i].head, negatives[i].rel, negatives[i].tail),
        -scale * weights[i] * sigmoid(margin - scratch[i]), sink);
  }
  return loss;
}

void write_raw(std::ofstream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data),
            static_cast<std::streamsize>(bytes));
}

template <typename T>
void write_pod(std::ofstream& out, T value) {
  write_raw(out, &value, sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(path.string() + ": truncated embedding file");
  return value;
}

}  // namespace

EmbeddingModel::EmbeddingModel(EmbeddingKind kind, std::size_t num_entities,
                               std::size_t num_relations, std::size_t dim,
                               double margin)
    : kind_(kind),
      num_entities_(num_entities),
      num_relations_(num_relations),
      dim_(dim),
      margin_(margin),
      entities_(num_entities * (kind == EmbeddingKind::kRotational ? 2 * dim
                                                                   : dim),
                0.0),
      relations_(num_relations * dim, 0.0) {}

std::span<const double> EmbeddingModel::entity(EntityId e) const {
  return std::span<const double>(entities_).subspan(
      e.value() * entity_stride(), entity_stride());
}

std::span<double> EmbeddingModel::entity(EntityId e) {
  return std::span<double>(entities_).subspan(e.value() * entity_stride(),
                                              entity_stride());
}

std::span<const double> EmbeddingModel::relation(RelationId r) const {
  return std::span<const double>(relations_).subspan(r.value() * dim_, dim_);
}

std::span<double> EmbeddingModel::relation(RelationId r) {
  return std::span<double>(relations_).subspan(r.value() * dim_, dim_);
}

double transe_distance(const EmbeddingModel& model, EntityId h, RelationId r,
                       EntityId t) {
  require_kind(model, EmbeddingKind::kTranslational, "transe_distance");
  return transe_forward(model, orient(model, h, r, t));
}

double rotate_distance(const EmbeddingModel& model, EntityId h, RelationId r,
                       EntityId t) {
  require_kind(model, EmbeddingKind::kRotational, "rotate_distance");
  return rotate_forward(model, orient(model, h, r, t));
}

double distance(const EmbeddingModel& model, EntityId h, RelationId r,
                EntityId t) {
  const Oriented o = orient(model, h, r, t);
  return model.kind() == EmbeddingKind::kTranslational
             ? transe_forward(model, o)
             : rotate_forward(model, o);
}

std::vector<double> adversarial_weights(std::span<const double> distances,
                                        double margin, double alpha) {
  std::vector<double> w(distances.size());
  if (distances.empty()) return w;
  double top = -std::numeric_limits<double>::infinity();
  for (double d : distances) top = std::max(top, alpha * (margin - d));
  double total = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    w[i] = std::exp(alpha * (margin - distances[i]) - top);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<double> adversarial_weights(const EmbeddingModel& model,
                                        std::span<const Triple> negatives,
                                        double alpha) {
  std::vector<double> d;
  d.reserve(negatives.size());
  for (const Triple& n : negatives) {
    d.push_back(distance(model, n.head, n.rel, n.tail));
  }
  return adversarial_weights(d, model.margin(), alpha);
}

double nll_loss(double positive_distance,
                std::span<const double> negative_distances, double margin,
                double alpha) {
  const auto w = adversarial_weights(negative_distances, margin, alpha);
  double loss = -log_sigmoid(margin - positive_distance);
  for (std::size_t i = 0; i < w.size(); ++i) {
    loss -= w[i] * log_sigmoid(negative_distances[i] - margin);
  }
  return loss;
}

double nll_loss(const EmbeddingModel& model, const Triple& positive,
                std::span<const Triple> negatives, double alpha) {
  std::vector<double> d;
  d.reserve(negatives.size());
  for (const Triple& n : negatives) {
    d.push_back(distance(model, n.head, n.rel, n.tail));
  }
  return nll_loss(distance(model, positive.head, positive.rel, positive.tail),
                  d, model.margin(), alpha);
}

double accumulate_nll_gradient(const EmbeddingModel& model,
                               const Triple& positive,
                               std::span<const Triple> negatives, double alpha,
                               double scale, ModelGradient& grad) {
  DenseSink sink(model, grad);
  std::vector<double> scratch;
  return nll_gradient(model, positive, negatives, alpha, scale, sink, scratch);
}

void validate(const EmbeddingTrainConfig& config) {
  if (config.dim < 1) throw Error("embedding dim must be >= 1");
  if (config.negatives < 1) throw Error("embedding negatives must be >= 1");
  if (config.adversarial_temperature < 0.0) {
    throw Error("adversarial temperature must be >= 0");
  }
  if (config.batch_size < 1) throw Error("embedding batch size must be >= 1");
  if (!(config.learning_rate > 0.0)) {
    throw Error("embedding learning rate must be > 0");
  }
  if (!(config.margin > 0.0)) throw Error("margin must be > 0");
}

EmbeddingModel initialize_embeddings(const TripleStore& store,
                                     const EmbeddingTrainConfig& config) {
  validate(config);
  EmbeddingModel model(config.kind, store.num_entities(),
                       store.num_relations(), config.dim, config.margin);
  Rng rng = derive_rng(config.seed, {0x1417});
  const double bound = config.margin / static_cast<double>(config.dim);
  std::uniform_real_distribution<double> coord(-bound, bound);
  for (double& x : model.entity_data()) x = coord(rng);
  if (config.kind == EmbeddingKind::kRotational) {
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    for (double& x : model.relation_data()) x = phase(rng);
  } else {
    for (double& x : model.relation_data()) x = coord(rng);
  }
  return model;
}

std::vector<double> continue_training(EmbeddingModel& model,
                                      const TripleStore& store,
                                      const EmbeddingTrainConfig& config,
                                      const TrainProgress& progress) {
  validate(config);
  if (model.kind() != config.kind || model.dim() != config.dim ||
      model.num_entities() != store.num_entities() ||
      model.num_relations() != store.num_relations()) {
    throw Error("embedding model does not match dataset or config");
  }
  const auto& train = store.train();
  if (train.empty()) throw Error("cannot train embeddings on empty split");
  const std::size_t batch = config.batch_size;
  const std::size_t negs = config.negatives;
  const std::size_t parts =
      config.partitions == 0
          ? static_cast<std::size_t>(std::max(1, config.threads))
          : config.partitions;
  const double scale = 1.0 / static_cast<double>(batch);

  std::vector<Triple> positives(batch);
  std::vector<Triple> negatives(batch * negs);
  std::vector<double> step_losses;
  double window_loss = 0.0;
  std::uint64_t window_steps = 0;

  for (std::uint64_t step = model.steps_done(); step < config.steps; ++step) {
    Rng rng = derive_rng(config.seed, {0x57e9, step});
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
    std::uniform_int_distribution<std::uint32_t> entity(
        0, static_cast<std::uint32_t>(store.num_entities() - 1));
    std::bernoulli_distribution corrupt_head(0.5);
    for (std::size_t b = 0; b < batch; ++b) {
      positives[b] = train[pick(rng)];
      for (std::size_t n = 0; n < negs; ++n) {
        Triple neg = positives[b];
        if (corrupt_head(rng)) {
          neg.head = EntityId(entity(rng));
        } else {
          neg.tail = EntityId(entity(rng));
        }
        negatives[b * negs + n] = neg;
      }
    }

    std::vector<SparseGradient> grads(
        parts, SparseGradient(model.entity_stride(), model.dim()));
    std::vector<double> losses(parts, 0.0);
    parallel_for(parts, config.threads, [&](std::size_t p) {
      const std::size_t lo = batch * p / parts;
      const std::size_t hi = batch * (p + 1) / parts;
      std::vector<double> scratch;
      for (std::size_t b = lo; b < hi; ++b) {
        losses[p] += nll_gradient(
            model, positives[b],
            std::span<const Triple>(negatives).subspan(b * negs, negs),
            config.adversarial_temperature, scale, grads[p], scratch);
      }
    });
    double loss = 0.0;
    for (double l : losses) loss += l;
    loss *= scale;
    if (!std::isfinite(loss)) {
      throw Error("embedding training diverged at step " +
                  std::to_string(step) + " (loss " + std::to_string(loss) +
                  "); lower the learning rate");
    }

    // Reduce partitions in order so the update is independent of threads.
    auto apply = [&](auto rows_of, auto data_of, std::span<double> params,
                     std::size_t stride, bool wrap_phase) {
      std::vector<std::uint32_t> touched;
      for (const auto& g : grads) {
        for (const auto& [id, _] : rows_of(g)) touched.push_back(id);
      }
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()),
                    touched.end());
      std::vector<double> sum(stride);
      for (std::uint32_t id : touched) {
        std::fill(sum.begin(), sum.end(), 0.0);
        for (const auto& g : grads) {
          const auto it = rows_of(g).find(id);
          if (it == rows_of(g).end()) continue;
          const double* src = data_of(g, it->second);
          for (std::size_t k = 0; k < stride; ++k) sum[k] += src[k];
        }
        double* dst = params.data() + static_cast<std::size_t>(id) * stride;
        for (std::size_t k = 0; k < stride; ++k) {
          dst[k] -= config.learning_rate * sum[k];
          if (wrap_phase) {
            dst[k] = std::fmod(dst[k], kTwoPi);
            if (dst[k] < 0.0) dst[k] += kTwoPi;
          }
          if (!std::isfinite(dst[k])) {
            throw Error("embedding training diverged at step " +
                        std::to_string(step) +
                        " (non-finite parameter); lower the learning rate");
          }
        }
      }
    };
    apply([](const SparseGradient& g) -> const auto& { return g.entity_rows(); },
          [](const SparseGradient& g, std::size_t off) {
            return g.entity_at(off);
          },
          std::span<double>(model.entity_data()), model.entity_stride(),
          false);
    apply(
        [](const SparseGradient& g) -> const auto& {
          return g.relation_rows();
        },
        [](const SparseGradient& g, std::size_t off) {
          return g.relation_at(off);
        },
        std::span<double>(model.relation_data()), model.dim(),
        model.kind() == EmbeddingKind::kRotational);

    model.set_steps_done(step + 1);
    step_losses.push_back(loss);
    window_loss += loss;
    ++window_steps;
    if (config.log_every > 0 && (step + 1) % config.log_every == 0) {
      if (progress) {
        progress(step + 1, window_loss / static_cast<double>(window_steps));
      }
      window_loss = 0.0;
      window_steps = 0;
    }
  }
  return step_losses;
}

EmbeddingModel train_embeddings(const TripleStore& store,
                                const EmbeddingTrainConfig& config,
                                const TrainProgress& progress) {
  EmbeddingModel model = initialize_embeddings(store, config);
  continue_training(model, store, config, progress);
  return model;
}

std::size_t feature_dim(const EmbeddingModel& model) {
  return 2 * model.entity_stride();
}

std::vector<double> feature_vector(const EmbeddingModel& model, EntityId h,
                                   EntityId t) {
  std::vector<double> out;
  out.reserve(feature_dim(model));
  const auto hv = model.entity(h);
  const auto tv = model.entity(t);
  out.insert(out.end(), hv.begin(), hv.end());
  out.insert(out.end(), tv.begin(), tv.end());
  return out;
}

void write_features(const EmbeddingModel& model, EntityId h, EntityId t,
                    std::span<float> out) {
  const std::size_t stride = model.entity_stride();
  if (out.size() != 2 * stride) throw Error("feature buffer size mismatch");
  const auto hv = model.entity(h);
  const auto tv = model.entity(t);
  for (std::size_t k = 0; k < stride; ++k) {
    out[k] = static_cast<float>(hv[k]);
    out[stride + k] = static_cast<float>(tv[k]);
  }
}

void save_embeddings(const std::filesystem::path& path,
                     const EmbeddingModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  write_raw(out, kMagic.data(), kMagic.size());
  write_pod<std::uint32_t>(out, kFormatVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.kind()));
  write_pod<std::uint64_t>(out, model.num_entities());
  write_pod<std::uint64_t>(out, model.num_relations());
  write_pod<std::uint64_t>(out, model.dim());
  write_pod<double>(out, model.margin());
  write_pod<std::uint32_t>(
      out, model.kind() == EmbeddingKind::kRotational ? 1u : 0u);
  write_pod<std::uint32_t>(out, 0u);
  write_pod<std::uint64_t>(out, model.steps_done());
  write_raw(out, model.entity_data().data(),
            model.entity_data().size() * sizeof(double));
  write_raw(out, model.relation_data().data(),
            model.relation_data().size() * sizeof(double));
  if (!out) throw Error("failed writing " + path.string());
}

EmbeddingModel load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw Error(path.string() + ": not an embedding model file");
  }
  if (read_pod<std::uint32_t>(in, path) != kFormatVersion) {
    throw Error(path.string() + ": unsupported embedding format version");
  }
  const auto kind_raw = read_pod<std::uint32_t>(in, path);
  if (kind_raw > 1) throw Error(path.string() + ": unknown embedding kind");
  const auto kind = static_cast<EmbeddingKind>(kind_raw);
  const auto num_entities = read_pod<std::uint64_t>(in, path);
  const auto num_relations = read_pod<std::uint64_t>(in, path);
  const auto dim = read_pod<std::uint64_t>(in, path);
  const auto margin = read_pod<double>(in, path);
  const auto layout = read_pod<std::uint32_t>(in, path);
  if (layout != (kind == EmbeddingKind::kRotational ? 1u : 0u)) {
    throw Error(path.string() + ": layout tag does not match kind");
  }
  read_pod<std::uint32_t>(in, path);
  const auto steps = read_pod<std::uint64_t>(in, path);
  EmbeddingModel model(kind, num_entities, num_relations, dim, margin);
  model.set_steps_done(steps);
  in.read(reinterpret_cast<char*>(model.entity_data().data()),
          static_cast<std::streamsize>(model.entity_data().size() *
                                       sizeof(double)));
  in.read(reinterpret_cast<char*>(model.relation_data().data()),
          static_cast<std::streamsize>(model.relation_data().size() *
                                       sizeof(double)));
  if (!in) throw Error(path.string() + ": truncated embedding file");
  return model;
}

}  // namespace kbc
