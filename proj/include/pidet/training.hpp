#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pidet/nn.hpp"
#include "pidet/rng.hpp"

namespace pidet {

inline double binary_cross_entropy(double p, bool label) {
  const double lo = 1e-7;
  const double clamped = std::min(1.0 - lo, std::max(lo, p));
  return label ? -std::log(clamped) : -std::log(1.0 - clamped);
}

struct EncodedSample {
  std::vector<std::int32_t> seq;
  bool malicious = false;
};

using EncodedDataset = std::vector<EncodedSample>;

// Adam with bias correction; one slot per parameter span.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t step = 0;
};

inline AdamState make_adam_state(const std::vector<std::span<double>>& params) {
  AdamState st;
  for (const auto p : params) {
    st.m.emplace_back(p.size(), 0.0);
    st.v.emplace_back(p.size(), 0.0);
  }
  return st;
}

inline void adam_step(AdamState& st, const std::vector<std::span<double>>& params,
                      const std::vector<std::span<double>>& grads, const HyperParams& hp) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient shape mismatch");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (params[k].size() != grads[k].size() || params[k].size() != st.m[k].size())
      throw std::invalid_argument("adam_step: parameter/gradient shape mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    const auto g = grads[k];
    auto& m = st.m[k];
    auto& v = st.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= hp.learning_rate * mhat / (std::sqrt(vhat) + hp.epsilon);
    }
  }
}

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainingHistory {
  std::vector<EpochStats> epochs;
};

template <class Model>
std::pair<double, double> evaluate_loss(const Model& model, const EncodedDataset& data) {
  if (data.empty()) return {0.0, 0.0};
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& s : data) {
    const double p = forward(model, s.seq);
    loss += binary_cross_entropy(p, s.malicious);
    if ((p >= 0.5) == s.malicious) ++correct;
  }
  return {loss / static_cast<double>(data.size()),
          static_cast<double>(correct) / static_cast<double>(data.size())};
}

// Mini-batch gradient descent with Adam. Batch gradients are averaged; the
// last short batch is kept. Sample order reshuffles every epoch from a
// stream derived from hp.seed, so a fixed seed replays the exact run.
template <class Model>
TrainingHistory train_network(Model& model, const EncodedDataset& train,
                              const EncodedDataset& val, const HyperParams& hp) {
  using Cache = typename model_traits<Model>::Cache;
  if (train.empty()) throw std::invalid_argument("train_network: empty training set");
  if (hp.batch_size < 1) throw std::invalid_argument("train_network: batch_size must be positive");
  if (hp.batch_size > train.size())
    throw std::invalid_argument("train_network: batch_size exceeds training-set size");
  bool any_pos = false, any_neg = false;
  for (const auto& s : train) (s.malicious ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg)
    throw std::invalid_argument("train_network: both classes must be present");

  auto grads = zero_like(model);
  auto params = param_spans(model);
  auto grad_views = param_spans(grads);
  AdamState adam = make_adam_state(params);
  Rng order_rng = make_rng(mix_seed(hp.seed, 0x9e3779b97f4a7c15ull));

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainingHistory history;
  Cache cache;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    shuffle(order, order_rng);
    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto g : grad_views) std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& s = train[order[k]];
        const double p = forward(model, s.seq, &cache);
        if (!std::isfinite(p))
          throw std::runtime_error("train_network: non-finite loss at epoch " +
                                   std::to_string(epoch + 1));
        epoch_loss += binary_cross_entropy(p, s.malicious);
        if ((p >= 0.5) == s.malicious) ++correct;
        const double dlogit = (p - (s.malicious ? 1.0 : 0.0)) * inv;
        backward(model, cache, dlogit, grads);
      }
      adam_step(adam, params, grad_views, hp);
      // Runaway updates show up in the parameters; the clamped loss and the
      // saturated sigmoid stay finite no matter how far a run has exploded.
      // No legitimate model gets anywhere near 1e100.
      for (const auto p : params)
        for (const double x : p)
          if (!std::isfinite(x) || std::abs(x) > 1e100)
            throw std::runtime_error("train_network: training diverged at epoch " +
                                     std::to_string(epoch + 1));
    }
    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(train.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    if (!std::isfinite(stats.train_loss))
      throw std::runtime_error("train_network: non-finite loss at epoch " +
                               std::to_string(epoch + 1));
    const auto [vl, va] = evaluate_loss(model, val);
    stats.val_loss = vl;
    stats.val_accuracy = va;
    history.epochs.push_back(stats);
  }
  return history;
}

struct GradientCheckResult {
  double max_rel_error = 0.0;
  std::size_t n_checked = 0;
  bool passed = false;
};

// Central-difference check of the analytic gradients on one sample.
// Intended for tiny shapes; the cost is two forwards per parameter.
template <class Model>
GradientCheckResult gradient_check(Model& model, const EncodedSample& sample,
                                   double step = 1e-5, double tolerance = 1e-4) {
  using Cache = typename model_traits<Model>::Cache;
  std::size_t n_params = 0;
  for (const auto p : param_spans(model)) n_params += p.size();
  if (n_params > 20000)
    throw std::invalid_argument("gradient_check: model too large, use tiny dimensions");

  auto grads = zero_like(model);
  Cache cache;
  const double p0 = forward(model, sample.seq, &cache);
  backward(model, cache, p0 - (sample.malicious ? 1.0 : 0.0), grads);

  auto params = param_spans(model);
  auto grad_views = param_spans(grads);
  GradientCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double saved = params[k][i];
      params[k][i] = saved + step;
      const double lp = binary_cross_entropy(forward(model, sample.seq), sample.malicious);
      params[k][i] = saved - step;
      const double lm = binary_cross_entropy(forward(model, sample.seq), sample.malicious);
      params[k][i] = saved;
      const double numeric = (lp - lm) / (2.0 * step);
      const double analytic = grad_views[k][i];
      // The floor absorbs central-difference roundoff (~1e-11 absolute at
      // double precision with this step) on near-zero gradient components.
      const double denom = std::max(1e-6, std::abs(analytic) + std::abs(numeric));
      const double rel = std::abs(analytic - numeric) / denom;
      result.max_rel_error = std::max(result.max_rel_error, rel);
      ++result.n_checked;
    }
  }
  result.passed = result.max_rel_error <= tolerance;
  return result;
}

}  // namespace pidet
