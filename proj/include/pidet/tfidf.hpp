#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pidet {

// L2-normalized sparse feature vector; entries sorted by index, no duplicates.
struct SparseVector {
  std::vector<std::pair<std::int32_t, double>> entries;

  double at(std::int32_t index) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), index,
                                     [](const auto& e, std::int32_t i) { return e.first < i; });
    return it != entries.end() && it->first == index ? it->second : 0.0;
  }
};

// Term frequency x smoothed inverse document frequency, the feature space for
// the classical models. Variant pinned here so every consumer agrees:
// raw tf, idf(t) = ln((1 + N) / (1 + df(t))) + 1, L2-normalized documents.
struct TfidfModel {
  std::vector<std::string> features;  // selection order: (df desc, token asc)
  std::unordered_map<std::string, std::int32_t> feature_index;
  std::vector<double> idf;
  std::size_t n_documents = 0;
  std::size_t max_features = 1000;

  std::size_t feature_count() const { return features.size(); }
};

// Selects the top max_features tokens by document frequency (ties broken
// lexicographically) over the training documents only.
inline TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& train_docs,
                            std::size_t max_features = 1000) {
  if (train_docs.empty()) throw std::invalid_argument("fit_tfidf: empty training corpus");
  if (max_features < 1) throw std::invalid_argument("fit_tfidf: max_features must be >= 1");

  std::unordered_map<std::string, std::uint64_t> df;
  {
    std::unordered_map<std::string, std::size_t> last_doc;
    for (std::size_t d = 0; d < train_docs.size(); ++d) {
      for (const auto& tok : train_docs[d]) {
        auto [it, inserted] = last_doc.try_emplace(tok, d);
        if (inserted || it->second != d) {
          it->second = d;
          ++df[tok];
        }
      }
    }
  }

  std::vector<std::pair<std::string, std::uint64_t>> order(df.begin(), df.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (order.size() > max_features) order.resize(max_features);

  TfidfModel model;
  model.n_documents = train_docs.size();
  model.max_features = max_features;
  const double n = static_cast<double>(train_docs.size());
  for (const auto& [tok, count] : order) {
    model.feature_index.emplace(tok, static_cast<std::int32_t>(model.features.size()));
    model.features.push_back(tok);
    model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return model;
}

// weight(t) = count(t in doc) * idf(t) for in-vocabulary tokens, then L2
// normalization. Out-of-vocabulary tokens are ignored; a document with no
// known token maps to the zero vector.
inline SparseVector transform_tfidf(const TfidfModel& model, const std::vector<std::string>& doc) {
  std::map<std::int32_t, double> counts;
  for (const auto& tok : doc) {
    const auto it = model.feature_index.find(tok);
    if (it != model.feature_index.end()) counts[it->second] += 1.0;
  }
  SparseVector vec;
  vec.entries.reserve(counts.size());
  double norm_sq = 0.0;
  for (const auto& [index, count] : counts) {
    const double w = count * model.idf[static_cast<std::size_t>(index)];
    vec.entries.emplace_back(index, w);
    norm_sq += w * w;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& [_, w] : vec.entries) w *= inv;
  }
  return vec;
}

}  // namespace pidet
