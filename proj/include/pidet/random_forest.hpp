#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pidet/rng.hpp"
#include "pidet/tfidf.hpp"

namespace pidet {

// Internal nodes carry (feature, threshold, children); leaves carry class
// counts. Children indices point into the tree's node vector.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::array<std::uint32_t, 2> counts{0, 0};  // leaf class counts

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  // Majority vote of the reached leaf; ties resolve to benign.
  bool predict(const SparseVector& x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x.at(n.feature) <= n.threshold ? n.left : n.right);
    }
    return nodes[i].counts[1] > nodes[i].counts[0];
  }
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Grows one CART tree: Gini impurity, midpoint thresholds over the sorted
// distinct values of ceil(sqrt(F)) randomly sampled candidate features,
// recursion until pure or fewer than 2 samples.
class TreeBuilder {
 public:
  TreeBuilder(const std::vector<double>& dense, std::size_t n_features,
              const std::vector<bool>& y, Rng& rng)
      : dense_(dense), n_features_(n_features), y_(y), rng_(rng),
        mtry_(static_cast<std::size_t>(
            std::ceil(std::sqrt(static_cast<double>(n_features))))) {}

  DecisionTree build(std::vector<std::size_t> samples) {
    tree_.nodes.clear();
    grow(std::move(samples));
    return std::move(tree_);
  }

 private:
  double value(std::size_t sample, std::size_t feature) const {
    return dense_[sample * n_features_ + feature];
  }

  std::int32_t make_leaf(const std::array<std::uint32_t, 2>& counts) {
    TreeNode leaf;
    leaf.counts = counts;
    tree_.nodes.push_back(leaf);
    return static_cast<std::int32_t>(tree_.nodes.size() - 1);
  }

  std::int32_t grow(std::vector<std::size_t> samples) {
    std::array<std::uint32_t, 2> counts{0, 0};
    for (const std::size_t s : samples) ++counts[y_[s] ? 1 : 0];
    if (samples.size() < 2 || counts[0] == 0 || counts[1] == 0) return make_leaf(counts);

    const auto candidates = sample_without_replacement(rng_, n_features_, mtry_);
    double best_impurity = std::numeric_limits<double>::infinity();
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, bool>> sorted;
    sorted.reserve(samples.size());
    const double n = static_cast<double>(samples.size());
    for (const std::size_t f : candidates) {
      sorted.clear();
      for (const std::size_t s : samples) sorted.emplace_back(value(s, f), y_[s]);
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (sorted.front().first == sorted.back().first) continue;

      std::array<double, 2> left{0, 0};
      std::array<double, 2> right{static_cast<double>(counts[0]), static_cast<double>(counts[1])};
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        const auto& [v, label] = sorted[k];
        left[label ? 1 : 0] += 1.0;
        right[label ? 1 : 0] -= 1.0;
        const double next = sorted[k + 1].first;
        if (v == next) continue;
        const double nl = left[0] + left[1];
        const double nr = right[0] + right[1];
        const double gini_l = 1.0 - (left[0] * left[0] + left[1] * left[1]) / (nl * nl);
        const double gini_r = 1.0 - (right[0] * right[0] + right[1] * right[1]) / (nr * nr);
        const double weighted = (nl * gini_l + nr * gini_r) / n;
        if (weighted < best_impurity) {
          best_impurity = weighted;
          best_feature = static_cast<std::int32_t>(f);
          best_threshold = v + (next - v) / 2.0;
        }
      }
    }
    if (best_feature < 0) return make_leaf(counts);  // all candidates constant

    std::vector<std::size_t> left_samples;
    std::vector<std::size_t> right_samples;
    for (const std::size_t s : samples) {
      (value(s, static_cast<std::size_t>(best_feature)) <= best_threshold ? left_samples
                                                                          : right_samples)
          .push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();

    TreeNode node;
    node.feature = best_feature;
    node.threshold = best_threshold;
    tree_.nodes.push_back(node);
    const auto index = static_cast<std::int32_t>(tree_.nodes.size() - 1);
    tree_.nodes[static_cast<std::size_t>(index)].left = grow(std::move(left_samples));
    tree_.nodes[static_cast<std::size_t>(index)].right = grow(std::move(right_samples));
    return index;
  }

  const std::vector<double>& dense_;
  std::size_t n_features_;
  const std::vector<bool>& y_;
  Rng& rng_;
  std::size_t mtry_;
  DecisionTree tree_;
};

}  // namespace detail

// Bagged CART ensemble: each tree fits a bootstrap resample of the training
// set with a fresh generator stream derived from (seed, tree index), so the
// forest is reproducible and trees could be grown in parallel.
inline ForestModel train_random_forest(const std::vector<SparseVector>& X,
                                       const std::vector<bool>& y, std::size_t n_features,
                                       std::size_t n_trees, std::uint64_t seed) {
  if (X.size() != y.size()) throw std::invalid_argument("train_random_forest: |X| != |y|");
  if (X.empty()) throw std::invalid_argument("train_random_forest: empty training set");
  if (n_features < 1 || n_trees < 1)
    throw std::invalid_argument("train_random_forest: need n_features >= 1 and n_trees >= 1");

  std::vector<double> dense(X.size() * n_features, 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (const auto& [index, w] : X[i].entries) {
      if (index < 0 || static_cast<std::size_t>(index) >= n_features)
        throw std::invalid_argument("train_random_forest: feature index out of range");
      dense[i * n_features + static_cast<std::size_t>(index)] = w;
    }
  }

  ForestModel model;
  model.n_features = n_features;
  model.seed = seed;
  model.trees.reserve(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    Rng rng = make_rng(mix_seed(seed, t));
    std::vector<std::size_t> bootstrap(X.size());
    for (auto& s : bootstrap) s = uniform_index(rng, X.size());
    detail::TreeBuilder builder(dense, n_features, y, rng);
    model.trees.push_back(builder.build(std::move(bootstrap)));
  }
  return model;
}

// Fraction of trees voting malicious; the 0.5 tie classifies as benign under
// the shared (score > 0.5) decision rule.
inline double predict_forest(const ForestModel& model, const SparseVector& x) {
  std::size_t votes = 0;
  for (const auto& tree : model.trees) votes += tree.predict(x);
  return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

}  // namespace pidet
