#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pidet/text.hpp"

namespace pidet {

// Malicious is the positive class throughout.
struct ConfusionMatrix {
  std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

  std::uint64_t total() const { return tp + fn + fp + tn; }
};

inline ConfusionMatrix confusion_matrix(const std::vector<bool>& truth,
                                        const std::vector<bool>& predicted) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("confusion_matrix: size mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      if (predicted[i]) ++cm.tp;
      else ++cm.fn;
    } else {
      if (predicted[i]) ++cm.fp;
      else ++cm.tn;
    }
  }
  return cm;
}

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct ClassificationReport {
  ClassStats benign;
  ClassStats malicious;
  double accuracy = 0.0;
  ClassStats macro_avg;     // support = total
  ClassStats weighted_avg;  // support = total
  bool degenerate = false;  // some ratio had a zero denominator
};

namespace detail {

inline double safe_div(std::uint64_t num, std::uint64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

inline double f1_of(double precision, double recall, bool& degenerate) {
  if (precision + recall == 0.0) {
    degenerate = true;
    return 0.0;
  }
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace detail

inline ClassificationReport classification_report(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::invalid_argument("classification_report: empty matrix");
  ClassificationReport r;
  bool& deg = r.degenerate;
  // benign = negative class: predicted-negative precision, actual-negative recall
  r.benign.precision = detail::safe_div(cm.tn, cm.tn + cm.fn, deg);
  r.benign.recall = detail::safe_div(cm.tn, cm.tn + cm.fp, deg);
  r.benign.f1 = detail::f1_of(r.benign.precision, r.benign.recall, deg);
  r.benign.support = cm.tn + cm.fp;
  r.malicious.precision = detail::safe_div(cm.tp, cm.tp + cm.fp, deg);
  r.malicious.recall = detail::safe_div(cm.tp, cm.tp + cm.fn, deg);
  r.malicious.f1 = detail::f1_of(r.malicious.precision, r.malicious.recall, deg);
  r.malicious.support = cm.tp + cm.fn;
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  r.macro_avg.precision = (r.benign.precision + r.malicious.precision) / 2.0;
  r.macro_avg.recall = (r.benign.recall + r.malicious.recall) / 2.0;
  r.macro_avg.f1 = (r.benign.f1 + r.malicious.f1) / 2.0;
  r.macro_avg.support = cm.total();
  const double wb = static_cast<double>(r.benign.support);
  const double wm = static_cast<double>(r.malicious.support);
  const double wt = wb + wm;
  r.weighted_avg.precision = (wb * r.benign.precision + wm * r.malicious.precision) / wt;
  r.weighted_avg.recall = (wb * r.benign.recall + wm * r.malicious.recall) / wt;
  r.weighted_avg.f1 = (wb * r.benign.f1 + wm * r.malicious.f1) / wt;
  r.weighted_avg.support = cm.total();
  return r;
}

// Round half away from zero at `digits` decimals, the convention the
// reference tables use (0.995 prints as 1.00, not 0.99).
inline double round_half_up(double x, int digits) {
  const double scale = std::pow(10.0, digits);
  return std::round(x * scale) / scale;
}

namespace detail {

inline std::string fixed2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round_half_up(x, 2));
  return buf;
}

}  // namespace detail

// Plain-text layout matching the usual classification-report table.
inline std::string render_report(const ClassificationReport& r) {
  const auto row = [](const std::string& name, const std::string& p, const std::string& rc,
                      const std::string& f1, std::uint64_t support) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%14s %10s %10s %10s %10llu\n", name.c_str(), p.c_str(),
                  rc.c_str(), f1.c_str(), static_cast<unsigned long long>(support));
    return std::string(buf);
  };
  std::string out;
  {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%14s %10s %10s %10s %10s\n", "", "precision", "recall",
                  "f1-score", "support");
    out += buf;
  }
  out += "\n";
  using detail::fixed2;
  out += row("benign", fixed2(r.benign.precision), fixed2(r.benign.recall), fixed2(r.benign.f1),
             r.benign.support);
  out += row("malicious", fixed2(r.malicious.precision), fixed2(r.malicious.recall),
             fixed2(r.malicious.f1), r.malicious.support);
  out += "\n";
  out += row("accuracy", "", "", fixed2(r.accuracy), r.macro_avg.support);
  out += row("macro avg", fixed2(r.macro_avg.precision), fixed2(r.macro_avg.recall),
             fixed2(r.macro_avg.f1), r.macro_avg.support);
  out += row("weighted avg", fixed2(r.weighted_avg.precision), fixed2(r.weighted_avg.recall),
             fixed2(r.weighted_avg.f1), r.weighted_avg.support);
  return out;
}

inline nlohmann::json class_stats_to_json(const ClassStats& s) {
  return {{"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"support", s.support}};
}

inline nlohmann::json report_to_json(const ConfusionMatrix& cm, const ClassificationReport& r) {
  return {{"confusion_matrix", {{"tp", cm.tp}, {"fn", cm.fn}, {"fp", cm.fp}, {"tn", cm.tn}}},
          {"benign", class_stats_to_json(r.benign)},
          {"malicious", class_stats_to_json(r.malicious)},
          {"accuracy", r.accuracy},
          {"macro_avg", class_stats_to_json(r.macro_avg)},
          {"weighted_avg", class_stats_to_json(r.weighted_avg)},
          {"degenerate", r.degenerate}};
}

struct TokenCount {
  std::string token;
  std::uint64_t count = 0;
};

// Most frequent normalized tokens in a document set; ties break
// lexicographically so the listing is stable.
inline std::vector<TokenCount> token_frequency_report(const std::vector<std::string>& docs,
                                                      std::size_t top_k) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& doc : docs)
    for (auto& tok : tokenize(normalize(doc))) counts[std::move(tok)] += 1;
  std::vector<TokenCount> all;
  all.reserve(counts.size());
  for (auto& [tok, n] : counts) all.push_back({tok, n});
  std::sort(all.begin(), all.end(), [](const TokenCount& a, const TokenCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.token < b.token;
  });
  if (all.size() > top_k) all.resize(top_k);
  return all;
}

}  // namespace pidet
