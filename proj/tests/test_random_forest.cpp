#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "pidet/random_forest.hpp"
#include "pidet/rng.hpp"

using namespace pidet;

namespace {

SparseVector one_dim(double value) {
  SparseVector v;
  v.entries = {{0, value}};
  return v;
}

DecisionTree leaf_tree(bool malicious) {
  DecisionTree t;
  TreeNode n;
  n.counts = malicious ? std::array<std::uint32_t, 2>{0, 5} : std::array<std::uint32_t, 2>{5, 0};
  t.nodes.push_back(n);
  return t;
}

}  // namespace

TEST_CASE("pure-label input grows single-leaf trees") {
  std::vector<SparseVector> X = {one_dim(0.1), one_dim(0.7), one_dim(0.4)};
  const auto model = train_random_forest(X, {true, true, true}, 1, 10, 42);
  REQUIRE(model.trees.size() == 10);
  for (const auto& tree : model.trees) {
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].is_leaf());
  }
  CHECK(predict_forest(model, one_dim(0.2)) == 1.0);
}

TEST_CASE("perfectly separable 1D data reaches training accuracy 1") {
  std::vector<SparseVector> X;
  std::vector<bool> y;
  for (int i = 0; i < 10; ++i) {
    X.push_back(one_dim(static_cast<double>(i) / 10.0));
    y.push_back(i > 5);
  }
  const auto model = train_random_forest(X, y, 1, 25, 7);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double score = predict_forest(model, X[i]);
    CHECK((score > 0.5) == y[i]);
  }
}

TEST_CASE("same seed trains identical forests") {
  Rng data_rng = make_rng(100);
  std::vector<SparseVector> X;
  std::vector<bool> y;
  for (int i = 0; i < 40; ++i) {
    SparseVector v;
    for (std::int32_t f = 0; f < 5; ++f) v.entries.emplace_back(f, uniform_real(data_rng, 0, 1));
    const bool label = v.entries[2].second > 0.5;
    X.push_back(std::move(v));
    y.push_back(label);
  }
  const auto a = train_random_forest(X, y, 5, 20, 9);
  const auto b = train_random_forest(X, y, 5, 20, 9);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
      CHECK(a.trees[t].nodes[n].feature == b.trees[t].nodes[n].feature);
      CHECK(a.trees[t].nodes[n].threshold == b.trees[t].nodes[n].threshold);
    }
  }
  const auto c = train_random_forest(X, y, 5, 20, 10);
  bool all_same = true;
  for (const auto& x : X) all_same = all_same && predict_forest(a, x) == predict_forest(c, x);
  CHECK_FALSE(all_same);  // a different seed should change at least one score
}

TEST_CASE("forest vote fractions are exact") {
  ForestModel model;
  model.n_features = 1;
  for (int i = 0; i < 60; ++i) model.trees.push_back(leaf_tree(true));
  for (int i = 0; i < 40; ++i) model.trees.push_back(leaf_tree(false));
  CHECK(predict_forest(model, one_dim(0.0)) == Catch::Approx(0.6).margin(1e-15));
}

TEST_CASE("score tie and leaf tie resolve to benign") {
  ForestModel model;
  model.n_features = 1;
  model.trees.push_back(leaf_tree(true));
  model.trees.push_back(leaf_tree(false));
  CHECK(predict_forest(model, one_dim(0.0)) == 0.5);  // caller treats > 0.5 as malicious

  DecisionTree tied;
  TreeNode n;
  n.counts = {3, 3};
  tied.nodes.push_back(n);
  CHECK_FALSE(tied.predict(one_dim(0.0)));
}

TEST_CASE("prediction is invariant under tree reordering") {
  std::vector<SparseVector> X;
  std::vector<bool> y;
  Rng data_rng = make_rng(3);
  for (int i = 0; i < 30; ++i) {
    X.push_back(one_dim(uniform_real(data_rng, 0, 1)));
    y.push_back(X.back().entries[0].second > 0.4);
  }
  auto model = train_random_forest(X, y, 1, 15, 4);
  auto shuffled = model;
  std::reverse(shuffled.trees.begin(), shuffled.trees.end());
  for (const auto& x : X) CHECK(predict_forest(model, x) == predict_forest(shuffled, x));
}

TEST_CASE("forest with one tree equals that tree") {
  std::vector<SparseVector> X = {one_dim(0.1), one_dim(0.9), one_dim(0.2), one_dim(0.8)};
  const std::vector<bool> y = {false, true, false, true};
  const auto model = train_random_forest(X, y, 1, 1, 11);
  REQUIRE(model.trees.size() == 1);
  for (const auto& x : X)
    CHECK(predict_forest(model, x) == (model.trees[0].predict(x) ? 1.0 : 0.0));
}

TEST_CASE("train_random_forest validates input") {
  CHECK_THROWS_AS(train_random_forest({}, {}, 1, 10, 1), std::invalid_argument);
  std::vector<SparseVector> X = {one_dim(0.5)};
  CHECK_THROWS_AS(train_random_forest(X, {true, false}, 1, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(train_random_forest(X, {true}, 0, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(train_random_forest(X, {true}, 1, 0, 1), std::invalid_argument);
}

TEST_CASE("internal thresholds are finite midpoints") {
  std::vector<SparseVector> X = {one_dim(0.0), one_dim(1.0)};
  const auto model = train_random_forest(X, {false, true}, 1, 50, 21);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) {
        CHECK(node.counts[0] + node.counts[1] > 0);
      } else {
        CHECK(std::isfinite(node.threshold));
        CHECK(node.threshold == 0.5);  // midpoint of the only split
      }
    }
  }
}
