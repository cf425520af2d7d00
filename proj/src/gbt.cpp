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

#include "kbc/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "kbc/math.hpp"
#include "kbc/parallel.hpp"
#include "kbc/types.hpp"

namespace kbc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Relative width of the band in which two gains count as equal, and in which
// a gain counts as zero against the magnitude of its terms.
constexpr double kGainTolerance = 1e-12;

// Row indices of each feature column in ascending value order (stable).
struct SortedColumns {
  std::vector<std::vector<std::uint32_t>> order;

  SortedColumns(const LabeledMatrix& matrix, int threads) {
    order.resize(matrix.num_features());
    parallel_for(matrix.num_features(), threads, [&](std::size_t f) {
      auto& idx = order[f];
      idx.resize(matrix.num_rows());
      std::iota(idx.begin(), idx.end(), 0u);
      const auto col = matrix.column(f);
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::uint32_t a, std::uint32_t b) {
                         return col[a] < col[b];
                       });
    });
  }
};

// A row of a column-major matrix, addressable by feature index.
struct MatrixRow {
  const LabeledMatrix* matrix;
  std::size_t row;
  float operator[](std::size_t feature) const {
    return matrix->value(row, feature);
  }
};

struct BuildNode {
  double grad = 0.0;
  double hess = 0.0;
  int depth = 0;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;
};

struct ScanState {
  double grad_left = 0.0;
  double hess_left = 0.0;
  float last = 0.0f;
  bool has_prev = false;
};

double leaf_weight(double grad, double hess, double l2) {
  return -grad / (hess + l2);
}

// Converts build order into the preorder layout of RegressionTree.
void emit_preorder(const std::vector<BuildNode>& build, int index,
                   std::vector<RegressionTree::Node>& out) {
  const BuildNode& b = build[static_cast<std::size_t>(index)];
  const std::size_t self = out.size();
  out.push_back({});
  if (b.feature < 0) {
    out[self].weight = b.weight;
    return;
  }
  out[self].feature = b.feature;
  out[self].threshold = b.threshold;
  emit_preorder(build, b.left, out);
  out[self].right = static_cast<std::int32_t>(out.size());
  emit_preorder(build, b.right, out);
}

RegressionTree grow_tree(const LabeledMatrix& matrix,
                         const SortedColumns& sorted,
                         std::span<const double> grad,
                         std::span<const double> hess,
                         const GbtConfig& config) {
  const std::size_t rows = matrix.num_rows();
  const std::size_t features = matrix.num_features();
  const double l2 = config.l2_leaf_penalty;

  std::vector<BuildNode> nodes(1);
  for (std::size_t r = 0; r < rows; ++r) {
    nodes[0].grad += grad[r];
    nodes[0].hess += hess[r];
  }
  std::vector<int> node_of(rows, 0);
  std::vector<int> active = {0};

  while (!active.empty()) {
    // Slot of each node in this level's split search, -1 if not searched.
    std::vector<int> slot_of(nodes.size(), -1);
    std::vector<int> searched;
    for (int n : active) {
      if (nodes[static_cast<std::size_t>(n)].depth < config.max_depth) {
        slot_of[static_cast<std::size_t>(n)] =
            static_cast<int>(searched.size());
        searched.push_back(n);
      }
    }

    // Best candidate per (feature, slot), then folded in feature order so the
    // result does not depend on the thread count.
    std::vector<std::vector<SplitChoice>> per_feature(
        features, std::vector<SplitChoice>(searched.size(),
                                           SplitChoice{-1, 0.0, kNegInf}));
    if (!searched.empty()) {
      parallel_for(features, config.threads, [&](std::size_t f) {
        std::vector<ScanState> state(searched.size());
        auto& best = per_feature[f];
        const auto col = matrix.column(f);
        for (std::uint32_t r : sorted.order[f]) {
          const int n = node_of[r];
          if (n < 0) continue;
          const int s = slot_of[static_cast<std::size_t>(n)];
          if (s < 0) continue;
          ScanState& st = state[static_cast<std::size_t>(s)];
          const float v = col[r];
          if (st.has_prev && v != st.last) {
            const BuildNode& node = nodes[static_cast<std::size_t>(n)];
            const double grad_right = node.grad - st.grad_left;
            const double hess_right = node.hess - st.hess_left;
            if (st.hess_left >= config.min_child_hessian &&
                hess_right >= config.min_child_hessian) {
              const double gain = split_gain(st.grad_left, st.hess_left,
                                             grad_right, hess_right, l2);
              SplitChoice& b = best[static_cast<std::size_t>(s)];
              if (gain_improves(gain, b.gain)) {
                b = SplitChoice{static_cast<int>(f),
                                (static_cast<double>(st.last) +
                                 static_cast<double>(v)) /
                                    2.0,
                                gain};
              }
            }
          }
          st.grad_left += grad[r];
          st.hess_left += hess[r];
          st.last = v;
          st.has_prev = true;
        }
      });
    }

    std::vector<int> next;
    std::vector<int> split_left(nodes.size(), -1);
    for (int n : active) {
      const auto un = static_cast<std::size_t>(n);
      const int s = slot_of[un];
      SplitChoice best{-1, 0.0, kNegInf};
      if (s >= 0) {
        for (std::size_t f = 0; f < features; ++f) {
          const SplitChoice& c = per_feature[f][static_cast<std::size_t>(s)];
          if (c.feature >= 0 && gain_improves(c.gain, best.gain)) best = c;
        }
      }
      if (best.feature >= 0 && best.gain > config.min_split_gain) {
        const int depth = nodes[un].depth + 1;
        const int left = static_cast<int>(nodes.size());
        nodes.push_back(BuildNode{});
        nodes.push_back(BuildNode{});
        nodes[un].feature = best.feature;
        nodes[un].threshold = best.threshold;
        nodes[un].left = left;
        nodes[un].right = left + 1;
        nodes[static_cast<std::size_t>(left)].depth = depth;
        nodes[static_cast<std::size_t>(left) + 1].depth = depth;
        split_left.resize(nodes.size(), -1);
        split_left[un] = left;
        next.push_back(left);
        next.push_back(left + 1);
      } else {
        nodes[un].weight = leaf_weight(nodes[un].grad, nodes[un].hess, l2);
      }
    }

    for (std::size_t r = 0; r < rows; ++r) {
      const int n = node_of[r];
      if (n < 0) continue;
      const auto un = static_cast<std::size_t>(n);
      if (split_left[un] < 0) {
        node_of[r] = -1;
        continue;
      }
      const BuildNode& parent = nodes[un];
      const int child =
          static_cast<double>(matrix.value(r, static_cast<std::size_t>(
                                                  parent.feature))) <
                  parent.threshold
              ? parent.left
              : parent.right;
      node_of[r] = child;
      nodes[static_cast<std::size_t>(child)].grad += grad[r];
      nodes[static_cast<std::size_t>(child)].hess += hess[r];
    }
    active = std::move(next);
  }

  std::vector<RegressionTree::Node> out;
  out.reserve(nodes.size());
  emit_preorder(nodes, 0, out);
  return RegressionTree(std::move(out));
}

void gradients(std::span<const double> labels, std::span<const double> margins,
               std::vector<double>& grad, std::vector<double>& hess) {
  grad.resize(labels.size());
  hess.resize(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const GradHess gh = logistic_grad_hess(labels[r], margins[r]);
    grad[r] = gh.grad;
    hess[r] = gh.hess;
  }
}

}  // namespace

void validate(const GbtConfig& config) {
  if (config.num_estimators < 1) throw Error("num_estimators must be >= 1");
  if (config.max_depth < 1) throw Error("max_depth must be >= 1");
  if (!(config.learning_rate >= 0.0 && config.learning_rate <= 1.0)) {
    throw Error("learning_rate must be in [0, 1]");
  }
  if (config.l2_leaf_penalty < 0.0) throw Error("l2_leaf_penalty must be >= 0");
  if (config.min_child_hessian < 0.0) {
    throw Error("min_child_hessian must be >= 0");
  }
}

GradHess logistic_grad_hess(double label, double margin) {
  const double p = sigmoid(margin);
  return {p - label, p * (1.0 - p)};
}

double split_gain(double grad_left, double hess_left, double grad_right,
                  double hess_right, double l2) {
  const double left = grad_left * grad_left / (hess_left + l2);
  const double right = grad_right * grad_right / (hess_right + l2);
  const double grad_total = grad_left + grad_right;
  const double parent = grad_total * grad_total / (hess_left + hess_right + l2);
  const double gain = 0.5 * (left + right - parent);
  // Cancellation noise when children are proportional to the parent.
  if (std::abs(gain) <= kGainTolerance * (left + right + parent)) return 0.0;
  return gain;
}

bool gain_improves(double candidate, double incumbent) {
  if (incumbent == kNegInf) return candidate > kNegInf;
  return candidate - incumbent >
         kGainTolerance * std::max({1e-300, std::abs(candidate),
                                    std::abs(incumbent)});
}

std::optional<SplitChoice> best_split(std::span<const float> values,
                                      std::span<const double> grad,
                                      std::span<const double> hess, int feature,
                                      double l2, double min_child_hessian,
                                      double min_split_gain) {
  const std::size_t n = values.size();
  if (grad.size() != n || hess.size() != n) {
    throw Error("best_split: input size mismatch");
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return values[a] < values[b];
                   });
  double grad_total = 0.0;
  double hess_total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    grad_total += grad[r];
    hess_total += hess[r];
  }
  SplitChoice best{-1, 0.0, kNegInf};
  double grad_left = 0.0;
  double hess_left = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t r = order[i];
    if (i > 0 && values[r] != values[order[i - 1]]) {
      const double grad_right = grad_total - grad_left;
      const double hess_right = hess_total - hess_left;
      if (hess_left >= min_child_hessian && hess_right >= min_child_hessian) {
        const double gain =
            split_gain(grad_left, hess_left, grad_right, hess_right, l2);
        if (gain_improves(gain, best.gain)) {
          best = SplitChoice{feature,
                             (static_cast<double>(values[order[i - 1]]) +
                              static_cast<double>(values[r])) /
                                 2.0,
                             gain};
        }
      }
    }
    grad_left += grad[r];
    hess_left += hess[r];
  }
  if (best.feature < 0 || !(best.gain > min_split_gain)) return std::nullopt;
  return best;
}

void LabeledMatrix::add_row(std::span<const float> features, double label) {
  if (features.size() != num_features_) {
    throw Error("LabeledMatrix: row length mismatch");
  }
  if (label != 0.0 && label != 1.0) throw Error("labels must be 0 or 1");
  if (columns_.size() != num_features_) columns_.resize(num_features_);
  for (std::size_t f = 0; f < num_features_; ++f) {
    columns_[f].push_back(features[f]);
  }
  labels_.push_back(label);
}

void LabeledMatrix::reserve(std::size_t rows) {
  if (columns_.size() != num_features_) columns_.resize(num_features_);
  for (auto& c : columns_) c.reserve(rows);
  labels_.reserve(rows);
}

std::vector<float> LabeledMatrix::row(std::size_t r) const {
  std::vector<float> out(num_features_);
  for (std::size_t f = 0; f < num_features_; ++f) out[f] = columns_[f][r];
  return out;
}

int RegressionTree::depth() const {
  // Preorder walk with an explicit stack of (node, depth).
  int deepest = 0;
  std::vector<std::pair<std::size_t, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes_[i].is_leaf()) {
      stack.emplace_back(i + 1, d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes_[i].right), d + 1);
    }
  }
  return deepest;
}

RegressionTree fit_tree_from_gradients(const LabeledMatrix& matrix,
                                       std::span<const double> grad,
                                       std::span<const double> hess,
                                       const GbtConfig& config) {
  if (matrix.num_rows() == 0) throw Error("fit_tree: empty matrix");
  const SortedColumns sorted(matrix, config.threads);
  return grow_tree(matrix, sorted, grad, hess, config);
}

RegressionTree fit_tree(const LabeledMatrix& matrix,
                        std::span<const double> margins,
                        const GbtConfig& config) {
  std::vector<double> grad;
  std::vector<double> hess;
  gradients(matrix.labels(), margins, grad, hess);
  return fit_tree_from_gradients(matrix, grad, hess, config);
}

double predict(const TreeEnsemble& ensemble, std::span<const float> features) {
  if (features.size() != ensemble.feature_dim()) {
    throw Error("predict: feature dimension " +
                std::to_string(features.size()) + " != ensemble dimension " +
                std::to_string(ensemble.feature_dim()));
  }
  return sigmoid(ensemble.margin(features));
}

double predict(const TreeEnsemble& ensemble,
               std::span<const double> features) {
  if (features.size() != ensemble.feature_dim()) {
    throw Error("predict: feature dimension " +
                std::to_string(features.size()) + " != ensemble dimension " +
                std::to_string(ensemble.feature_dim()));
  }
  return sigmoid(ensemble.margin(features));
}

EnsembleTrainer::EnsembleTrainer(const GbtConfig& config,
                                 std::size_t feature_dim)
    : config_(config), ensemble_(feature_dim, config.learning_rate) {
  validate(config_);
}

void EnsembleTrainer::set_matrix(LabeledMatrix matrix) {
  if (matrix.num_features() != ensemble_.feature_dim()) {
    throw Error("EnsembleTrainer: matrix feature dimension mismatch");
  }
  matrix_ = std::move(matrix);
  margins_.assign(matrix_.num_rows(), 0.0);
  for (std::size_t r = 0; r < matrix_.num_rows(); ++r) {
    margins_[r] = ensemble_.margin(MatrixRow{&matrix_, r});
  }
}

void EnsembleTrainer::boost(int num_trees) {
  if (num_trees <= 0) return;
  if (matrix_.num_rows() == 0) throw Error("boost: empty training matrix");
  const SortedColumns sorted(matrix_, config_.threads);
  std::vector<double> grad;
  std::vector<double> hess;
  for (int k = 0; k < num_trees; ++k) {
    gradients(matrix_.labels(), margins_, grad, hess);
    RegressionTree tree = grow_tree(matrix_, sorted, grad, hess, config_);
    for (std::size_t r = 0; r < matrix_.num_rows(); ++r) {
      margins_[r] +=
          config_.learning_rate * tree.leaf_value(MatrixRow{&matrix_, r});
      if (!std::isfinite(margins_[r])) {
        throw Error("boosting diverged: non-finite margin at tree " +
                    std::to_string(ensemble_.trees().size()) + ", row " +
                    std::to_string(r));
      }
    }
    ensemble_.add_tree(std::move(tree));
  }
}

double EnsembleTrainer::training_logloss() const {
  if (margins_.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < margins_.size(); ++r) {
    total += logistic_loss(matrix_.label(r), margins_[r]);
  }
  return total / static_cast<double>(margins_.size());
}

TreeEnsemble train_ensemble(std::vector<TrainingStage> stages,
                            const GbtConfig& config) {
  if (stages.empty()) throw Error("train_ensemble: empty schedule");
  EnsembleTrainer trainer(config, stages.front().matrix.num_features());
  for (auto& stage : stages) {
    trainer.set_matrix(std::move(stage.matrix));
    trainer.boost(stage.num_trees);
  }
  return trainer.release();
}

double mean_logloss(const TreeEnsemble& ensemble, const LabeledMatrix& matrix) {
  if (matrix.num_rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < matrix.num_rows(); ++r) {
    total += logistic_loss(matrix.label(r),
                           ensemble.margin(MatrixRow{&matrix, r}));
  }
  return total / static_cast<double>(matrix.num_rows());
}

std::string serialize_ensemble(const TreeEnsemble& ensemble,
                               std::uint32_t relation) {
  std::string out = fmt::format(
      "kbc-gbt 1\nrelation {}\nfeature_dim {}\nlearning_rate {}\n"
      "num_trees {}\n",
      relation, ensemble.feature_dim(), ensemble.learning_rate(),
      ensemble.trees().size());
  for (std::size_t k = 0; k < ensemble.trees().size(); ++k) {
    const auto& nodes = ensemble.trees()[k].nodes();
    out += fmt::format("tree {} {}\n", k, nodes.size());
    for (const auto& n : nodes) {
      if (n.is_leaf()) {
        out += fmt::format("leaf {}\n", n.weight);
      } else {
        out += fmt::format("split {} {}\n", n.feature, n.threshold);
      }
    }
  }
  return out;
}

TreeEnsemble parse_ensemble(const std::string& text, std::uint32_t* relation) {
  std::istringstream in(text);
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> Error {
    return ParseError("ensemble", line_no, what);
  };
  auto next_line = [&]() {
    std::string line;
    if (!std::getline(in, line)) throw fail("unexpected end of model");
    ++line_no;
    return std::istringstream(line);
  };
  auto keyed = [&](const char* key) {
    auto ls = next_line();
    std::string k;
    std::string v;
    ls >> k >> v;
    if (k != key || v.empty()) throw fail(std::string("expected ") + key);
    return v;
  };
  {
    auto ls = next_line();
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "kbc-gbt" || version != 1) throw fail("not a kbc-gbt v1 model");
  }
  const auto rel = static_cast<std::uint32_t>(std::stoul(keyed("relation")));
  const std::size_t dim = std::stoull(keyed("feature_dim"));
  const double lr = std::strtod(keyed("learning_rate").c_str(), nullptr);
  const std::size_t num_trees = std::stoull(keyed("num_trees"));
  TreeEnsemble ensemble(dim, lr);
  for (std::size_t k = 0; k < num_trees; ++k) {
    auto header = next_line();
    std::string tag;
    std::size_t index = 0;
    std::size_t count = 0;
    header >> tag >> index >> count;
    if (tag != "tree" || index != k || count == 0) throw fail("bad tree header");
    std::vector<RegressionTree::Node> nodes(count);
    for (auto& n : nodes) {
      auto ls = next_line();
      std::string kind;
      std::string a;
      std::string b;
      ls >> kind >> a >> b;
      if (kind == "leaf" && !a.empty()) {
        n.weight = std::strtod(a.c_str(), nullptr);
      } else if (kind == "split" && !b.empty()) {
        n.feature = std::stoi(a);
        n.threshold = std::strtod(b.c_str(), nullptr);
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= dim) {
          throw fail("split feature out of range");
        }
      } else {
        throw fail("bad node line");
      }
    }
    // Rebuild right-child links from the preorder layout.
    std::size_t pos = 0;
    auto link = [&](auto&& self) -> void {
      if (pos >= nodes.size()) throw fail("truncated tree");
      const std::size_t i = pos++;
      if (nodes[i].is_leaf()) return;
      self(self);
      nodes[i].right = static_cast<std::int32_t>(pos);
      self(self);
    };
    link(link);
    if (pos != nodes.size()) throw fail("trailing nodes in tree");
    ensemble.add_tree(RegressionTree(std::move(nodes)));
  }
  if (relation != nullptr) *relation = rel;
  return ensemble;
}

void save_ensemble(const std::filesystem::path& path,
                   const TreeEnsemble& ensemble, std::uint32_t relation) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_ensemble(ensemble, relation);
  if (!out) throw Error("failed writing " + path.string());
}

TreeEnsemble load_ensemble(const std::filesystem::path& path,
                           std::uint32_t* relation) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_ensemble(buf.str(), relation);
  } catch (const ParseError& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace kbc
