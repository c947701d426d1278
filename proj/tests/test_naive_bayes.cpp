#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pidet/naive_bayes.hpp"
#include "pidet/rng.hpp"

using namespace pidet;

namespace {

// Direct Bayes enumeration: P(c | x) ∝ P(c) · ∏_t P(t|c)^w_t, computed in
// linear space. Only safe for tiny feature counts.
double brute_force_posterior(const NBModel& m, const SparseVector& x) {
  double joint[2];
  for (int c = 0; c < 2; ++c) {
    double p = std::exp(m.class_log_prior[c]);
    for (const auto& [f, w] : x.entries)
      p *= std::pow(std::exp(m.feature_log_likelihood[c][static_cast<std::size_t>(f)]), w);
    joint[c] = p;
  }
  return joint[1] / (joint[0] + joint[1]);
}

}  // namespace

TEST_CASE("train_nb computes priors from class frequencies") {
  std::vector<SparseVector> X(4);
  X[0].entries = {{0, 1.0}};
  X[1].entries = {{0, 1.0}};
  X[2].entries = {{1, 1.0}};
  X[3].entries = {{1, 1.0}};
  const auto m = train_nb(X, {false, false, true, true}, 2);
  CHECK(m.class_log_prior[0] == Catch::Approx(std::log(0.5)).margin(1e-15));
  CHECK(m.class_log_prior[1] == Catch::Approx(std::log(0.5)).margin(1e-15));

  const auto skewed = train_nb(X, {false, false, false, true}, 2);
  CHECK(skewed.class_log_prior[0] == Catch::Approx(std::log(0.75)).margin(1e-15));
  CHECK(skewed.class_log_prior[1] == Catch::Approx(std::log(0.25)).margin(1e-15));
}

TEST_CASE("train_nb hand example with alpha 1") {
  // One benign doc with unit weight on feature 0, one malicious on feature 1.
  std::vector<SparseVector> X(2);
  X[0].entries = {{0, 1.0}};
  X[1].entries = {{1, 1.0}};
  const auto m = train_nb(X, {false, true}, 2, 1.0);
  CHECK(m.feature_log_likelihood[0][0] == Catch::Approx(std::log(2.0 / 3.0)).margin(1e-15));
  CHECK(m.feature_log_likelihood[0][1] == Catch::Approx(std::log(1.0 / 3.0)).margin(1e-15));
  CHECK(m.feature_log_likelihood[1][0] == Catch::Approx(std::log(1.0 / 3.0)).margin(1e-15));
  CHECK(m.feature_log_likelihood[1][1] == Catch::Approx(std::log(2.0 / 3.0)).margin(1e-15));

  SparseVector x;
  x.entries = {{0, 1.0}};
  CHECK(predict_nb(m, x) == Catch::Approx(1.0 / 3.0).margin(1e-15));
  x.entries = {{1, 1.0}};
  CHECK(predict_nb(m, x) == Catch::Approx(2.0 / 3.0).margin(1e-15));
}

TEST_CASE("per-class likelihoods sum to one") {
  Rng rng = make_rng(5);
  std::vector<SparseVector> X(6);
  std::vector<bool> y;
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::int32_t f = 0; f < 4; ++f)
      if (uniform_index(rng, 2) == 1) X[i].entries.emplace_back(f, uniform_real(rng, 0.1, 2.0));
    y.push_back(i % 2 == 1);
  }
  const auto m = train_nb(X, y, 4, 0.7);
  for (int c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (const double ll : m.feature_log_likelihood[c]) sum += std::exp(ll);
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("predict_nb on a zero vector returns the prior") {
  std::vector<SparseVector> X(3);
  X[0].entries = {{0, 1.0}};
  X[1].entries = {{0, 2.0}};
  X[2].entries = {{1, 1.0}};
  const auto m = train_nb(X, {false, false, true}, 2);
  CHECK(predict_nb(m, SparseVector{}) == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("symmetric model and input give one half") {
  std::vector<SparseVector> X(2);
  X[0].entries = {{0, 1.0}, {1, 1.0}};
  X[1].entries = {{0, 1.0}, {1, 1.0}};
  const auto m = train_nb(X, {false, true}, 2);
  SparseVector x;
  x.entries = {{0, 0.3}, {1, 0.3}};
  CHECK(predict_nb(m, x) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("train_nb validates input") {
  std::vector<SparseVector> X(2);
  X[0].entries = {{0, 1.0}};
  X[1].entries = {{1, 1.0}};
  CHECK_THROWS_AS(train_nb(X, {true}, 2), std::invalid_argument);
  CHECK_THROWS_AS(train_nb({}, {}, 2), std::invalid_argument);
  CHECK_THROWS_AS(train_nb(X, {true, true}, 2), std::invalid_argument);  // single class
  CHECK_THROWS_AS(train_nb(X, {false, true}, 2, 0.0), std::invalid_argument);
  std::vector<SparseVector> bad(2);
  bad[0].entries = {{5, 1.0}};
  bad[1].entries = {{0, 1.0}};
  CHECK_THROWS_AS(train_nb(bad, {false, true}, 2), std::invalid_argument);
}

TEST_CASE("posterior matches brute-force enumeration on random tiny models") {
  Rng rng = make_rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n_features = 1 + uniform_index(rng, 4);
    const std::size_t n_docs = 2 + uniform_index(rng, 5);
    std::vector<SparseVector> X(n_docs);
    std::vector<bool> y(n_docs);
    for (std::size_t i = 0; i < n_docs; ++i) {
      for (std::int32_t f = 0; f < static_cast<std::int32_t>(n_features); ++f)
        if (uniform_index(rng, 2) == 1)
          X[i].entries.emplace_back(f, uniform_real(rng, 0.05, 3.0));
      y[i] = i % 2 == 0;  // guarantees both classes
    }
    const auto m = train_nb(X, y, n_features, uniform_real(rng, 0.2, 2.0));
    SparseVector probe;
    for (std::int32_t f = 0; f < static_cast<std::int32_t>(n_features); ++f)
      if (uniform_index(rng, 3) > 0) probe.entries.emplace_back(f, uniform_real(rng, 0.0, 2.0));
    CHECK(std::abs(predict_nb(m, probe) - brute_force_posterior(m, probe)) <= 1e-12);
  }
}
