#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pidet/tfidf.hpp"

namespace pidet {

// Multinomial naive Bayes over (possibly fractional) TF-IDF weights with
// Laplace smoothing. Class 0 = benign, class 1 = malicious.
struct NBModel {
  std::array<double, 2> class_log_prior{};
  std::array<std::vector<double>, 2> feature_log_likelihood;
  double alpha = 1.0;

  std::size_t feature_count() const { return feature_log_likelihood[0].size(); }
};

// log P(t|c) = ln((sum of weights of t in class c + alpha) /
//                 (sum of all weights in class c + alpha * |features|)).
inline NBModel train_nb(const std::vector<SparseVector>& X, const std::vector<bool>& y,
                        std::size_t n_features, double alpha = 1.0) {
  if (X.size() != y.size()) throw std::invalid_argument("train_nb: |X| != |y|");
  if (X.empty()) throw std::invalid_argument("train_nb: empty training set");
  if (alpha <= 0.0) throw std::invalid_argument("train_nb: alpha must be > 0");

  std::array<std::size_t, 2> class_count{0, 0};
  std::array<std::vector<double>, 2> weight_sum;
  weight_sum[0].assign(n_features, 0.0);
  weight_sum[1].assign(n_features, 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const std::size_t c = y[i] ? 1 : 0;
    ++class_count[c];
    for (const auto& [index, w] : X[i].entries) {
      if (index < 0 || static_cast<std::size_t>(index) >= n_features)
        throw std::invalid_argument("train_nb: feature index out of range");
      weight_sum[c][static_cast<std::size_t>(index)] += w;
    }
  }
  if (class_count[0] == 0 || class_count[1] == 0)
    throw std::invalid_argument("train_nb: both classes must be present");

  NBModel model;
  model.alpha = alpha;
  for (std::size_t c = 0; c < 2; ++c) {
    model.class_log_prior[c] =
        std::log(static_cast<double>(class_count[c]) / static_cast<double>(X.size()));
    double total = 0.0;
    for (const double w : weight_sum[c]) total += w;
    const double denom = total + alpha * static_cast<double>(n_features);
    model.feature_log_likelihood[c].resize(n_features);
    for (std::size_t f = 0; f < n_features; ++f)
      model.feature_log_likelihood[c][f] = std::log((weight_sum[c][f] + alpha) / denom);
  }
  return model;
}

// Posterior P(malicious | x) via the stable two-class log-odds form.
inline double predict_nb(const NBModel& model, const SparseVector& x) {
  std::array<double, 2> score = model.class_log_prior;
  for (const auto& [index, w] : x.entries) {
    const auto f = static_cast<std::size_t>(index);
    if (f >= model.feature_count()) throw std::invalid_argument("predict_nb: feature index out of range");
    score[0] += w * model.feature_log_likelihood[0][f];
    score[1] += w * model.feature_log_likelihood[1][f];
  }
  const double d = score[1] - score[0];
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

}  // namespace pidet
