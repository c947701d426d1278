#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pidet/rng.hpp"

namespace pidet {

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

// Shared training knobs; the defaults are the ones used throughout:
// Adam(0.001, 0.9, 0.999, 1e-8), batch 96, 25 epochs.
struct HyperParams {
  double learning_rate = 0.001;
  std::size_t batch_size = 96;
  std::size_t epochs = 25;
  std::size_t d_embed = 64;
  std::vector<std::size_t> fnn_hidden = {128, 64, 32};
  std::size_t lstm_hidden = 64;
  std::size_t max_len = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
};

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct DenseLayer {
  Matrix w;               // out x in
  std::vector<double> b;  // out
};

// --- feedforward classifier: embedding -> mean pool -> dense ReLU stack ->
// --- logistic output

struct FnnModel {
  std::size_t vocab_size = 0;
  std::size_t d_embed = 0;
  std::size_t max_len = 0;
  Matrix embedding;                // vocab_size x d_embed
  std::vector<DenseLayer> hidden;  // relu stack, three layers by default
  std::vector<double> w_out;
  double b_out = 0.0;
};

struct FnnGrads {
  Matrix embedding;
  std::vector<DenseLayer> hidden;
  std::vector<double> w_out;
  double b_out = 0.0;
};

struct FnnCache {
  std::vector<std::int32_t> seq;
  std::size_t n_tokens = 0;
  std::vector<double> pooled;
  std::vector<std::vector<double>> pre;  // affine outputs per hidden layer
  std::vector<std::vector<double>> act;  // relu(pre)
  double logit = 0.0;
  double p = 0.5;
};

namespace detail {

inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline void fill_uniform(std::vector<double>& v, Rng& rng, double lo, double hi) {
  for (auto& x : v) x = uniform_real(rng, lo, hi);
}

inline void check_sequence(std::span<const std::int32_t> seq, std::size_t vocab_size) {
  for (const auto idx : seq) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= vocab_size)
      throw std::out_of_range("sequence index outside vocabulary");
  }
}

}  // namespace detail

// Embedding entries uniform in [-0.05, 0.05]; dense weights Glorot-uniform;
// biases zero. Draw order is pinned so a seed fully determines the tensors.
inline FnnModel init_fnn(std::size_t vocab_size, const HyperParams& hp) {
  if (vocab_size < 2 || hp.d_embed < 1 || hp.fnn_hidden.empty() || hp.max_len < 1)
    throw std::invalid_argument("init_fnn: invalid dimensions");
  Rng rng = make_rng(hp.seed);
  FnnModel m;
  m.vocab_size = vocab_size;
  m.d_embed = hp.d_embed;
  m.max_len = hp.max_len;
  m.embedding = Matrix(vocab_size, hp.d_embed);
  detail::fill_uniform(m.embedding.a, rng, -0.05, 0.05);
  std::size_t fan_in = hp.d_embed;
  for (const std::size_t width : hp.fnn_hidden) {
    DenseLayer layer;
    layer.w = Matrix(width, fan_in);
    const double lim = detail::glorot_limit(fan_in, width);
    detail::fill_uniform(layer.w.a, rng, -lim, lim);
    layer.b.assign(width, 0.0);
    m.hidden.push_back(std::move(layer));
    fan_in = width;
  }
  m.w_out.resize(fan_in);
  const double lim = detail::glorot_limit(fan_in, 1);
  detail::fill_uniform(m.w_out, rng, -lim, lim);
  m.b_out = 0.0;
  return m;
}

inline FnnGrads zero_like(const FnnModel& m) {
  FnnGrads g;
  g.embedding = Matrix(m.embedding.rows, m.embedding.cols);
  for (const auto& l : m.hidden) {
    DenseLayer z;
    z.w = Matrix(l.w.rows, l.w.cols);
    z.b.assign(l.b.size(), 0.0);
    g.hidden.push_back(std::move(z));
  }
  g.w_out.assign(m.w_out.size(), 0.0);
  g.b_out = 0.0;
  return g;
}

inline double fnn_forward(const FnnModel& m, std::span<const std::int32_t> seq,
                          FnnCache* cache = nullptr) {
  detail::check_sequence(seq, m.vocab_size);
  std::vector<double> pooled(m.d_embed, 0.0);
  std::size_t n_tokens = 0;
  for (const auto idx : seq) {
    if (idx == 0) continue;  // PAD
    const auto row = static_cast<std::size_t>(idx);
    for (std::size_t j = 0; j < m.d_embed; ++j) pooled[j] += m.embedding(row, j);
    ++n_tokens;
  }
  if (n_tokens > 0) {
    const double inv = 1.0 / static_cast<double>(n_tokens);
    for (auto& x : pooled) x *= inv;
  }

  std::vector<std::vector<double>> pre, act;
  const std::vector<double>* in = &pooled;
  for (const auto& layer : m.hidden) {
    std::vector<double> z(layer.w.rows, 0.0);
    for (std::size_t i = 0; i < layer.w.rows; ++i) {
      double s = layer.b[i];
      for (std::size_t j = 0; j < layer.w.cols; ++j) s += layer.w(i, j) * (*in)[j];
      z[i] = s;
    }
    std::vector<double> a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
    pre.push_back(std::move(z));
    act.push_back(std::move(a));
    in = &act.back();
  }
  double logit = m.b_out;
  for (std::size_t j = 0; j < m.w_out.size(); ++j) logit += m.w_out[j] * (*in)[j];
  const double p = sigmoid(logit);

  if (cache) {
    cache->seq.assign(seq.begin(), seq.end());
    cache->n_tokens = n_tokens;
    cache->pooled = std::move(pooled);
    cache->pre = std::move(pre);
    cache->act = std::move(act);
    cache->logit = logit;
    cache->p = p;
  }
  return p;
}

// Accumulates dLoss/dparam into `g` given dLoss/dlogit.
inline void fnn_backward(const FnnModel& m, const FnnCache& c, double dlogit, FnnGrads& g) {
  const std::vector<double>& last = c.act.empty() ? c.pooled : c.act.back();
  g.b_out += dlogit;
  std::vector<double> d(last.size());
  for (std::size_t j = 0; j < last.size(); ++j) {
    g.w_out[j] += dlogit * last[j];
    d[j] = dlogit * m.w_out[j];
  }
  for (std::size_t li = m.hidden.size(); li-- > 0;) {
    const auto& layer = m.hidden[li];
    const std::vector<double>& input = li == 0 ? c.pooled : c.act[li - 1];
    std::vector<double> dz(layer.w.rows);
    for (std::size_t i = 0; i < layer.w.rows; ++i)
      dz[i] = c.pre[li][i] > 0.0 ? d[i] : 0.0;
    auto& gl = g.hidden[li];
    std::vector<double> dprev(layer.w.cols, 0.0);
    for (std::size_t i = 0; i < layer.w.rows; ++i) {
      gl.b[i] += dz[i];
      for (std::size_t j = 0; j < layer.w.cols; ++j) {
        gl.w(i, j) += dz[i] * input[j];
        dprev[j] += layer.w(i, j) * dz[i];
      }
    }
    d = std::move(dprev);
  }
  if (c.n_tokens == 0) return;
  const double inv = 1.0 / static_cast<double>(c.n_tokens);
  for (const auto idx : c.seq) {
    if (idx == 0) continue;
    const auto row = static_cast<std::size_t>(idx);
    for (std::size_t j = 0; j < m.d_embed; ++j) g.embedding(row, j) += d[j] * inv;
  }
}

// --- LSTM classifier: embedding -> single LSTM layer -> dense logistic head

struct LstmGate {
  Matrix w;               // hidden x d_embed
  Matrix u;               // hidden x hidden
  std::vector<double> b;  // hidden
};

struct LstmModel {
  std::size_t vocab_size = 0;
  std::size_t d_embed = 0;
  std::size_t hidden = 0;
  std::size_t max_len = 0;
  Matrix embedding;
  LstmGate input, forget, cell, output;
  std::vector<double> w_out;
  double b_out = 0.0;
};

struct LstmGrads {
  Matrix embedding;
  LstmGate input, forget, cell, output;
  std::vector<double> w_out;
  double b_out = 0.0;
};

struct LstmCache {
  std::vector<std::int32_t> tokens;  // non-PAD prefix
  // per-step activations, each T x hidden
  std::vector<std::vector<double>> gi, gf, gg, go, c, tanh_c, h;
  double logit = 0.0;
  double p = 0.5;
};

inline LstmModel init_lstm(std::size_t vocab_size, const HyperParams& hp) {
  if (vocab_size < 2 || hp.d_embed < 1 || hp.lstm_hidden < 1 || hp.max_len < 1)
    throw std::invalid_argument("init_lstm: invalid dimensions");
  Rng rng = make_rng(hp.seed);
  LstmModel m;
  m.vocab_size = vocab_size;
  m.d_embed = hp.d_embed;
  m.hidden = hp.lstm_hidden;
  m.max_len = hp.max_len;
  m.embedding = Matrix(vocab_size, hp.d_embed);
  detail::fill_uniform(m.embedding.a, rng, -0.05, 0.05);
  const auto init_gate = [&](LstmGate& gate, double bias) {
    gate.w = Matrix(m.hidden, m.d_embed);
    detail::fill_uniform(gate.w.a, rng, -detail::glorot_limit(m.d_embed, m.hidden),
                         detail::glorot_limit(m.d_embed, m.hidden));
    gate.u = Matrix(m.hidden, m.hidden);
    detail::fill_uniform(gate.u.a, rng, -detail::glorot_limit(m.hidden, m.hidden),
                         detail::glorot_limit(m.hidden, m.hidden));
    gate.b.assign(m.hidden, bias);
  };
  init_gate(m.input, 0.0);
  init_gate(m.forget, 1.0);  // standard forget-gate bias
  init_gate(m.cell, 0.0);
  init_gate(m.output, 0.0);
  m.w_out.resize(m.hidden);
  const double lim = detail::glorot_limit(m.hidden, 1);
  detail::fill_uniform(m.w_out, rng, -lim, lim);
  m.b_out = 0.0;
  return m;
}

inline LstmGrads zero_like(const LstmModel& m) {
  LstmGrads g;
  g.embedding = Matrix(m.embedding.rows, m.embedding.cols);
  const auto zero_gate = [&](LstmGate& gate) {
    gate.w = Matrix(m.hidden, m.d_embed);
    gate.u = Matrix(m.hidden, m.hidden);
    gate.b.assign(m.hidden, 0.0);
  };
  zero_gate(g.input);
  zero_gate(g.forget);
  zero_gate(g.cell);
  zero_gate(g.output);
  g.w_out.assign(m.w_out.size(), 0.0);
  g.b_out = 0.0;
  return g;
}

inline double lstm_forward(const LstmModel& m, std::span<const std::int32_t> seq,
                           LstmCache* cache = nullptr) {
  detail::check_sequence(seq, m.vocab_size);
  std::vector<std::int32_t> tokens;
  for (const auto idx : seq) {
    if (idx == 0) break;  // PAD starts the padded tail
    tokens.push_back(idx);
  }
  const std::size_t T = tokens.size();
  const std::size_t H = m.hidden;

  LstmCache local;
  LstmCache& c = cache ? *cache : local;
  c.tokens = tokens;
  c.gi.assign(T, {});
  c.gf.assign(T, {});
  c.gg.assign(T, {});
  c.go.assign(T, {});
  c.c.assign(T, {});
  c.tanh_c.assign(T, {});
  c.h.assign(T, {});

  std::vector<double> h_prev(H, 0.0);
  std::vector<double> c_prev(H, 0.0);
  const auto affine = [&](const LstmGate& gate, std::size_t row_token, std::size_t i) {
    double s = gate.b[i];
    const auto x_row = static_cast<std::size_t>(row_token);
    for (std::size_t j = 0; j < m.d_embed; ++j) s += gate.w(i, j) * m.embedding(x_row, j);
    for (std::size_t j = 0; j < H; ++j) s += gate.u(i, j) * h_prev[j];
    return s;
  };
  for (std::size_t t = 0; t < T; ++t) {
    const auto tok = static_cast<std::size_t>(tokens[t]);
    auto& i_t = c.gi[t];
    auto& f_t = c.gf[t];
    auto& g_t = c.gg[t];
    auto& o_t = c.go[t];
    auto& c_t = c.c[t];
    auto& tc_t = c.tanh_c[t];
    auto& h_t = c.h[t];
    i_t.resize(H);
    f_t.resize(H);
    g_t.resize(H);
    o_t.resize(H);
    c_t.resize(H);
    tc_t.resize(H);
    h_t.resize(H);
    for (std::size_t i = 0; i < H; ++i) {
      i_t[i] = sigmoid(affine(m.input, tok, i));
      f_t[i] = sigmoid(affine(m.forget, tok, i));
      g_t[i] = std::tanh(affine(m.cell, tok, i));
      o_t[i] = sigmoid(affine(m.output, tok, i));
      c_t[i] = f_t[i] * c_prev[i] + i_t[i] * g_t[i];
      tc_t[i] = std::tanh(c_t[i]);
      h_t[i] = o_t[i] * tc_t[i];
    }
    h_prev = h_t;
    c_prev = c_t;
  }

  double logit = m.b_out;
  if (T > 0) {
    for (std::size_t j = 0; j < H; ++j) logit += m.w_out[j] * c.h[T - 1][j];
  }
  c.logit = logit;
  c.p = sigmoid(logit);
  return c.p;
}

// Backpropagation through time over the cached non-PAD prefix.
inline void lstm_backward(const LstmModel& m, const LstmCache& c, double dlogit, LstmGrads& g) {
  const std::size_t T = c.tokens.size();
  const std::size_t H = m.hidden;
  g.b_out += dlogit;
  if (T == 0) return;

  std::vector<double> dh(H);
  for (std::size_t j = 0; j < H; ++j) {
    g.w_out[j] += dlogit * c.h[T - 1][j];
    dh[j] = dlogit * m.w_out[j];
  }
  std::vector<double> dc_next(H, 0.0);
  std::vector<double> dai(H), daf(H), dag(H), dao(H);
  for (std::size_t t = T; t-- > 0;) {
    const auto tok = static_cast<std::size_t>(c.tokens[t]);
    const std::vector<double>* c_prev = t > 0 ? &c.c[t - 1] : nullptr;
    for (std::size_t i = 0; i < H; ++i) {
      const double o = c.go[t][i];
      const double tc = c.tanh_c[t][i];
      const double dc = dh[i] * o * (1.0 - tc * tc) + dc_next[i];
      const double iv = c.gi[t][i];
      const double fv = c.gf[t][i];
      const double gv = c.gg[t][i];
      dao[i] = dh[i] * tc * o * (1.0 - o);
      dai[i] = dc * gv * iv * (1.0 - iv);
      daf[i] = dc * (c_prev ? (*c_prev)[i] : 0.0) * fv * (1.0 - fv);
      dag[i] = dc * iv * (1.0 - gv * gv);
      dc_next[i] = dc * fv;
    }
    std::vector<double> dh_prev(H, 0.0);
    const auto accumulate = [&](LstmGate& gg_, const LstmGate& gate, const std::vector<double>& da) {
      for (std::size_t i = 0; i < H; ++i) {
        gg_.b[i] += da[i];
        for (std::size_t j = 0; j < m.d_embed; ++j)
          gg_.w(i, j) += da[i] * m.embedding(tok, j);
        if (t > 0) {
          for (std::size_t j = 0; j < H; ++j) gg_.u(i, j) += da[i] * c.h[t - 1][j];
        }
        for (std::size_t j = 0; j < H; ++j) dh_prev[j] += gate.u(i, j) * da[i];
      }
    };
    accumulate(g.input, m.input, dai);
    accumulate(g.forget, m.forget, daf);
    accumulate(g.cell, m.cell, dag);
    accumulate(g.output, m.output, dao);

    for (std::size_t j = 0; j < m.d_embed; ++j) {
      double dx = 0.0;
      for (std::size_t i = 0; i < H; ++i) {
        dx += m.input.w(i, j) * dai[i] + m.forget.w(i, j) * daf[i] +
              m.cell.w(i, j) * dag[i] + m.output.w(i, j) * dao[i];
      }
      g.embedding(tok, j) += dx;
    }
    dh = std::move(dh_prev);
  }
}

// --- flat parameter views, shared by Adam and the gradient checker ---

inline std::vector<std::span<double>> param_spans(FnnModel& m) {
  std::vector<std::span<double>> s;
  s.emplace_back(m.embedding.a);
  for (auto& l : m.hidden) {
    s.emplace_back(l.w.a);
    s.emplace_back(l.b);
  }
  s.emplace_back(m.w_out);
  s.emplace_back(&m.b_out, 1);
  return s;
}

inline std::vector<std::span<double>> param_spans(FnnGrads& g) {
  std::vector<std::span<double>> s;
  s.emplace_back(g.embedding.a);
  for (auto& l : g.hidden) {
    s.emplace_back(l.w.a);
    s.emplace_back(l.b);
  }
  s.emplace_back(g.w_out);
  s.emplace_back(&g.b_out, 1);
  return s;
}

namespace detail {

template <class GateLike>
void gate_spans(GateLike& gate, std::vector<std::span<double>>& s) {
  s.emplace_back(gate.w.a);
  s.emplace_back(gate.u.a);
  s.emplace_back(gate.b);
}

}  // namespace detail

inline std::vector<std::span<double>> param_spans(LstmModel& m) {
  std::vector<std::span<double>> s;
  s.emplace_back(m.embedding.a);
  detail::gate_spans(m.input, s);
  detail::gate_spans(m.forget, s);
  detail::gate_spans(m.cell, s);
  detail::gate_spans(m.output, s);
  s.emplace_back(m.w_out);
  s.emplace_back(&m.b_out, 1);
  return s;
}

inline std::vector<std::span<double>> param_spans(LstmGrads& g) {
  std::vector<std::span<double>> s;
  s.emplace_back(g.embedding.a);
  detail::gate_spans(g.input, s);
  detail::gate_spans(g.forget, s);
  detail::gate_spans(g.cell, s);
  detail::gate_spans(g.output, s);
  s.emplace_back(g.w_out);
  s.emplace_back(&g.b_out, 1);
  return s;
}

inline double forward(const FnnModel& m, std::span<const std::int32_t> seq, FnnCache* c = nullptr) {
  return fnn_forward(m, seq, c);
}
inline double forward(const LstmModel& m, std::span<const std::int32_t> seq, LstmCache* c = nullptr) {
  return lstm_forward(m, seq, c);
}
inline void backward(const FnnModel& m, const FnnCache& c, double dlogit, FnnGrads& g) {
  fnn_backward(m, c, dlogit, g);
}
inline void backward(const LstmModel& m, const LstmCache& c, double dlogit, LstmGrads& g) {
  lstm_backward(m, c, dlogit, g);
}

template <class Model>
struct model_traits;

template <>
struct model_traits<FnnModel> {
  using Grads = FnnGrads;
  using Cache = FnnCache;
};

template <>
struct model_traits<LstmModel> {
  using Grads = LstmGrads;
  using Cache = LstmCache;
};

}  // namespace pidet
