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

// Second-order gradient boosted regression trees with logistic loss and exact
// greedy split finding.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kbc {

struct GbtConfig {
  int num_estimators = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double l2_leaf_penalty = 1.0;
  double min_split_gain = 0.0;
  double min_child_hessian = 1.0;
  std::uint64_t seed = 0;
  int threads = 1;
};

void validate(const GbtConfig& config);

struct GradHess {
  double grad;
  double hess;
};

// First and second derivative of the binary cross entropy w.r.t. the margin.
GradHess logistic_grad_hess(double label, double margin);

// 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l)].
double split_gain(double grad_left, double hess_left, double grad_right,
                  double hess_right, double l2);

// Gains closer than this (relative) are ties; the earlier candidate wins.
bool gain_improves(double candidate, double incumbent);

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best threshold for one feature column: midpoints of sorted distinct values,
// lowest threshold among equal gains. Returns nullopt when no candidate has
// gain above `min_split_gain` with both children meeting `min_child_hessian`.
std::optional<SplitChoice> best_split(std::span<const float> values,
                                      std::span<const double> grad,
                                      std::span<const double> hess, int feature,
                                      double l2, double min_child_hessian,
                                      double min_split_gain);

// Dense column-major feature matrix with binary labels.
class LabeledMatrix {
 public:
  LabeledMatrix() = default;
  LabeledMatrix(std::size_t num_features) : num_features_(num_features) {}

  void add_row(std::span<const float> features, double label);
  void reserve(std::size_t rows);

  std::size_t num_rows() const { return labels_.size(); }
  std::size_t num_features() const { return num_features_; }
  double label(std::size_t row) const { return labels_[row]; }
  std::span<const double> labels() const { return labels_; }
  float value(std::size_t row, std::size_t feature) const {
    return columns_[feature][row];
  }
  std::span<const float> column(std::size_t feature) const {
    return columns_[feature];
  }
  std::vector<float> row(std::size_t r) const;

 private:
  std::size_t num_features_ = 0;
  std::vector<std::vector<float>> columns_;
  std::vector<double> labels_;
};

class RegressionTree {
 public:
  // Preorder node list. A split's left child follows it immediately; `right`
  // indexes the right child.
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    std::int32_t right = -1;
    double weight = 0.0;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  RegressionTree() = default;
  explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<Node>& nodes() const { return nodes_; }
  int depth() const;

  // Raw leaf weight reached by x (x[feature] < threshold goes left).
  template <typename Row>
  double leaf_value(const Row& x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const Node& n = nodes_[i];
      i = static_cast<double>(x[static_cast<std::size_t>(n.feature)]) <
                  n.threshold
              ? i + 1
              : static_cast<std::size_t>(n.right);
    }
    return nodes_[i].weight;
  }

  friend bool operator==(const RegressionTree&,
                         const RegressionTree&) = default;

 private:
  std::vector<Node> nodes_;
};

// Grows one tree on `matrix` given current margins: greedy, best
// (feature, threshold) per node, leaf weight -G/(H+l).
RegressionTree fit_tree(const LabeledMatrix& matrix,
                        std::span<const double> margins,
                        const GbtConfig& config);

// Same as fit_tree on precomputed gradient statistics.
RegressionTree fit_tree_from_gradients(const LabeledMatrix& matrix,
                                       std::span<const double> grad,
                                       std::span<const double> hess,
                                       const GbtConfig& config);

class TreeEnsemble {
 public:
  TreeEnsemble() = default;
  TreeEnsemble(std::size_t feature_dim, double learning_rate)
      : feature_dim_(feature_dim), learning_rate_(learning_rate) {}

  std::size_t feature_dim() const { return feature_dim_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  void add_tree(RegressionTree tree) { trees_.push_back(std::move(tree)); }

  // sum_k lr * f_k(x), accumulated in tree order.
  template <typename Row>
  double margin(const Row& x) const {
    double m = 0.0;
    for (const auto& tree : trees_) m += learning_rate_ * tree.leaf_value(x);
    return m;
  }

  friend bool operator==(const TreeEnsemble&, const TreeEnsemble&) = default;

 private:
  std::size_t feature_dim_ = 0;
  double learning_rate_ = 1.0;
  std::vector<RegressionTree> trees_;
};

// sigma(margin(x)); throws on feature dimension mismatch.
double predict(const TreeEnsemble& ensemble, std::span<const float> features);
double predict(const TreeEnsemble& ensemble, std::span<const double> features);

// Boosts an ensemble over a sequence of training matrices. Replacing the
// matrix restarts every row from the margin of the trees grown so far.
class EnsembleTrainer {
 public:
  EnsembleTrainer(const GbtConfig& config, std::size_t feature_dim);

  void set_matrix(LabeledMatrix matrix);
  // Grows `num_trees` more trees on the current matrix.
  void boost(int num_trees);

  const TreeEnsemble& ensemble() const { return ensemble_; }
  TreeEnsemble release() { return std::move(ensemble_); }
  const LabeledMatrix& matrix() const { return matrix_; }
  std::span<const double> margins() const { return margins_; }
  // Mean binary cross entropy of the current matrix.
  double training_logloss() const;

 private:
  GbtConfig config_;
  TreeEnsemble ensemble_;
  LabeledMatrix matrix_;
  std::vector<double> margins_;
};

struct TrainingStage {
  LabeledMatrix matrix;
  int num_trees = 0;
};

// Trains through a fixed schedule of stages.
TreeEnsemble train_ensemble(std::vector<TrainingStage> stages,
                            const GbtConfig& config);

// Mean binary cross entropy of `ensemble` on `matrix`.
double mean_logloss(const TreeEnsemble& ensemble, const LabeledMatrix& matrix);

// Text model:
//   kbc-gbt 1
//   relation <id>
//   feature_dim <n>
//   learning_rate <lr>
//   num_trees <K>
//   tree <index> <node count>      (per tree, nodes follow in preorder)
//   split <feature> <threshold>
//   leaf <weight>
std::string serialize_ensemble(const TreeEnsemble& ensemble,
                               std::uint32_t relation);
TreeEnsemble parse_ensemble(const std::string& text,
                            std::uint32_t* relation = nullptr);
void save_ensemble(const std::filesystem::path& path,
                   const TreeEnsemble& ensemble, std::uint32_t relation);
TreeEnsemble load_ensemble(const std::filesystem::path& path,
                           std::uint32_t* relation = nullptr);

}  // namespace kbc
