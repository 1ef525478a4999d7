/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossnav/binio.hpp"
#include "crossnav/rng.hpp"

namespace crossnav::nn {

template <typename S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<MatrixRM<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const MatrixRM<S>>;
template <typename S>
using VecMap = Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>;
template <typename S>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>;

/// Dense value array with shape; gradient storage allocated on demand.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> v;
  std::vector<S> g;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    v.assign(static_cast<size_t>(numel()), S(0));
  }

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
};

/// Named parameters with Adam moments; iteration order is creation order and
/// is the storage order of checkpoints.
template <typename S>
struct ParameterSet {
  struct Entry {
    std::string name;
    Tensor<S> tensor;
    std::vector<S> m;  // first moment
    std::vector<S> v;  // second moment
  };

  std::vector<Entry> entries;
  std::map<std::string, int> index;
  int64_t adam_step = 0;

  int add(const std::string& name, std::vector<int> shape) {
    if (index.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    Entry e;
    e.name = name;
    e.tensor = Tensor<S>(std::move(shape));
    e.tensor.g.assign(e.tensor.v.size(), S(0));
    e.m.assign(e.tensor.v.size(), S(0));
    e.v.assign(e.tensor.v.size(), S(0));
    entries.push_back(std::move(e));
    index[name] = static_cast<int>(entries.size()) - 1;
    return static_cast<int>(entries.size()) - 1;
  }

  Entry& at(int i) { return entries[static_cast<size_t>(i)]; }
  const Entry& at(int i) const { return entries[static_cast<size_t>(i)]; }

  int find(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw std::invalid_argument("no parameter " + name);
    return it->second;
  }

  int64_t total_params() const {
    int64_t n = 0;
    for (const auto& e : entries) n += e.tensor.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries) std::fill(e.tensor.g.begin(), e.tensor.g.end(), S(0));
  }
};

/// Per-chunk gradient buffer; buffers are reduced into the ParameterSet in a
/// fixed order so results do not depend on the worker count.
template <typename S>
struct Grads {
  std::vector<std::vector<S>> g;

  void init(const ParameterSet<S>& ps) {
    g.resize(ps.entries.size());
    for (size_t i = 0; i < g.size(); ++i)
      g[i].assign(ps.entries[i].tensor.v.size(), S(0));
  }

  void zero() {
    for (auto& v : g) std::fill(v.begin(), v.end(), S(0));
  }

  S* of(int param) { return g[static_cast<size_t>(param)].data(); }
};

template <typename S>
inline void reduce_grads(ParameterSet<S>& ps, const std::vector<Grads<S>>& chunks) {
  for (size_t p = 0; p < ps.entries.size(); ++p) {
    auto& dst = ps.entries[p].tensor.g;
    for (const auto& c : chunks) {
      const auto& src = c.g[p];
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
}

// ---- initializers ----

template <typename S>
inline void xavier_uniform(Tensor<S>& t, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& x : t.v) x = static_cast<S>(rng.uniform(-bound, bound));
}

template <typename S>
inline void small_uniform(Tensor<S>& t, double bound, Rng& rng) {
  for (auto& x : t.v) x = static_cast<S>(rng.uniform(-bound, bound));
}

// ---- kernels ----

/// y = x (n,in) * w (in,out) + b
template <typename S>
inline void linear_forward(const S* x, int n, int in, int out, const S* w,
                           const S* b, S* y) {
  ConstMatMap<S> X(x, n, in);
  ConstMatMap<S> W(w, in, out);
  MatMap<S> Y(y, n, out);
  Y.noalias() = X * W;
  if (b != nullptr) Y.rowwise() += ConstVecMap<S>(b, out);
}

/// dx (nullable), dw/db accumulated.
template <typename S>
inline void linear_backward(const S* x, const S* w, const S* dy, int n, int in,
                            int out, S* dx, S* dw, S* db) {
  ConstMatMap<S> X(x, n, in);
  ConstMatMap<S> W(w, in, out);
  ConstMatMap<S> dY(dy, n, out);
  if (dx != nullptr) {
    MatMap<S> dX(dx, n, in);
    dX.noalias() = dY * W.transpose();
  }
  MatMap<S> dW(dw, in, out);
  dW.noalias() += X.transpose() * dY;
  if (db != nullptr) VecMap<S>(db, out) += dY.colwise().sum();
}

template <typename S>
inline void elu_forward(const S* x, int64_t n, S* y) {
  for (int64_t i = 0; i < n; ++i)
    y[i] = x[i] > S(0) ? x[i] : static_cast<S>(std::expm1(static_cast<double>(x[i])));
}

/// Uses the forward output: d elu/dx = 1 for x>0, elu(x)+1 otherwise.
template <typename S>
inline void elu_backward(const S* y, const S* dy, int64_t n, S* dx) {
  for (int64_t i = 0; i < n; ++i)
    dx[i] = dy[i] * (y[i] > S(0) ? S(1) : y[i] + S(1));
}

template <typename S>
inline void gelu_forward(const S* x, int64_t n, S* y) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (int64_t i = 0; i < n; ++i) {
    const double xi = static_cast<double>(x[i]);
    y[i] = static_cast<S>(0.5 * xi * (1.0 + std::erf(xi * inv_sqrt2)));
  }
}

template <typename S>
inline void gelu_backward(const S* x, const S* dy, int64_t n, S* dx) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  for (int64_t i = 0; i < n; ++i) {
    const double xi = static_cast<double>(x[i]);
    const double cdf = 0.5 * (1.0 + std::erf(xi * inv_sqrt2));
    const double pdf = inv_sqrt2pi * std::exp(-0.5 * xi * xi);
    dx[i] = dy[i] * static_cast<S>(cdf + xi * pdf);
  }
}

/// Row-wise layer normalization with affine parameters.
template <typename S>
inline void layernorm_forward(const S* x, int n, int d, const S* gamma,
                              const S* beta, S* y, S* mean_cache,
                              S* rstd_cache, double eps = 1e-6) {
  for (int r = 0; r < n; ++r) {
    const S* xr = x + static_cast<int64_t>(r) * d;
    S* yr = y + static_cast<int64_t>(r) * d;
    double mu = 0.0;
    for (int i = 0; i < d; ++i) mu += xr[i];
    mu /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      const double c = xr[i] - mu;
      var += c * c;
    }
    var /= d;
    const double rstd = 1.0 / std::sqrt(var + eps);
    mean_cache[r] = static_cast<S>(mu);
    rstd_cache[r] = static_cast<S>(rstd);
    for (int i = 0; i < d; ++i)
      yr[i] = static_cast<S>((xr[i] - mu) * rstd) * gamma[i] + beta[i];
  }
}

template <typename S>
inline void layernorm_backward(const S* x, const S* gamma, const S* mean,
                               const S* rstd, const S* dy, int n, int d, S* dx,
                               S* dgamma, S* dbeta) {
  for (int r = 0; r < n; ++r) {
    const S* xr = x + static_cast<int64_t>(r) * d;
    const S* dyr = dy + static_cast<int64_t>(r) * d;
    S* dxr = dx + static_cast<int64_t>(r) * d;
    const double mu = mean[r];
    const double rs = rstd[r];
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (int i = 0; i < d; ++i) {
      const double xhat = (xr[i] - mu) * rs;
      const double dxhat = static_cast<double>(dyr[i]) * gamma[i];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
      dgamma[i] += static_cast<S>(static_cast<double>(dyr[i]) * xhat);
      dbeta[i] += dyr[i];
    }
    const double inv_d = 1.0 / d;
    for (int i = 0; i < d; ++i) {
      const double xhat = (xr[i] - mu) * rs;
      const double dxhat = static_cast<double>(dyr[i]) * gamma[i];
      dxr[i] = static_cast<S>(
          rs * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat));
    }
  }
}

/// Numerically stable in-place row softmax.
template <typename S>
inline void softmax_rows(S* x, int n, int d) {
  for (int r = 0; r < n; ++r) {
    S* xr = x + static_cast<int64_t>(r) * d;
    double mx = xr[0];
    for (int i = 1; i < d; ++i) mx = std::max(mx, static_cast<double>(xr[i]));
    double sum = 0.0;
    for (int i = 0; i < d; ++i) {
      const double e = std::exp(static_cast<double>(xr[i]) - mx);
      xr[i] = static_cast<S>(e);
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < d; ++i) xr[i] = static_cast<S>(xr[i] * inv);
  }
}

/// dS = P .* (dP - rowsum(dP .* P)) where P is the softmax output.
template <typename S>
inline void softmax_backward_rows(const S* p, const S* dp, int n, int d, S* ds) {
  for (int r = 0; r < n; ++r) {
    const S* pr = p + static_cast<int64_t>(r) * d;
    const S* dpr = dp + static_cast<int64_t>(r) * d;
    S* dsr = ds + static_cast<int64_t>(r) * d;
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += static_cast<double>(pr[i]) * dpr[i];
    for (int i = 0; i < d; ++i)
      dsr[i] = static_cast<S>(pr[i] * (dpr[i] - dot));
  }
}

// ---- multi-head attention over a batch of independent windows ----

struct AttentionDims {
  int embed = 0;
  int heads = 0;
  int head_dim() const { return embed / heads; }
};

template <typename S>
struct AttentionParams {
  int wq = -1, bq = -1, wk = -1, bk = -1, wv = -1, bv = -1, wo = -1, bo = -1;
  AttentionDims dims;

  static AttentionParams create(ParameterSet<S>& ps, const std::string& prefix,
                                int embed, int heads, Rng& rng) {
    if (embed % heads != 0)
      throw std::invalid_argument("embed dim must be divisible by heads");
    AttentionParams p;
    p.dims = {embed, heads};
    auto mk = [&](const std::string& n) {
      int idx = ps.add(prefix + "." + n, {embed, embed});
      xavier_uniform(ps.at(idx).tensor, embed, embed, rng);
      return idx;
    };
    auto mkb = [&](const std::string& n) { return ps.add(prefix + "." + n, {embed}); };
    p.wq = mk("wq");
    p.bq = mkb("bq");
    p.wk = mk("wk");
    p.bk = mkb("bk");
    p.wv = mk("wv");
    p.bv = mkb("bv");
    p.wo = mk("wo");
    p.bo = mkb("bo");
    return p;
  }
};

template <typename S>
struct AttentionCache {
  std::vector<S> q, k, v;      // projected activations
  std::vector<S> probs;        // B*H*n_q*n_kv softmax outputs
  std::vector<S> concat;       // pre-output-projection (B*n_q, E)
  const S* x_q = nullptr;
  const S* x_kv = nullptr;
  int batch = 0, n_q = 0, n_kv = 0;
};

/// Scaled dot-product attention per head over `batch` independent windows.
/// x_q: (batch*n_q, E) queries source; x_kv: (batch*n_kv, E) keys/values
/// source; y: (batch*n_q, E).
template <typename S>
inline void attention_forward(const ParameterSet<S>& ps,
                              const AttentionParams<S>& p, const S* x_q,
                              const S* x_kv, int batch, int n_q, int n_kv,
                              AttentionCache<S>& cache, S* y) {
  const int e = p.dims.embed;
  const int h = p.dims.heads;
  const int hd = p.dims.head_dim();
  const int rq = batch * n_q;
  const int rkv = batch * n_kv;

  cache.x_q = x_q;
  cache.x_kv = x_kv;
  cache.batch = batch;
  cache.n_q = n_q;
  cache.n_kv = n_kv;
  cache.q.resize(static_cast<size_t>(rq) * e);
  cache.k.resize(static_cast<size_t>(rkv) * e);
  cache.v.resize(static_cast<size_t>(rkv) * e);
  cache.probs.resize(static_cast<size_t>(batch) * h * n_q * n_kv);
  cache.concat.resize(static_cast<size_t>(rq) * e);

  linear_forward(x_q, rq, e, e, ps.at(p.wq).tensor.v.data(),
                 ps.at(p.bq).tensor.v.data(), cache.q.data());
  linear_forward(x_kv, rkv, e, e, ps.at(p.wk).tensor.v.data(),
                 ps.at(p.bk).tensor.v.data(), cache.k.data());
  linear_forward(x_kv, rkv, e, e, ps.at(p.wv).tensor.v.data(),
                 ps.at(p.bv).tensor.v.data(), cache.v.data());

  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(hd)));
  using Stride = Eigen::Stride<Eigen::Dynamic, 1>;
  for (int b = 0; b < batch; ++b) {
    for (int head = 0; head < h; ++head) {
      const S* qb = cache.q.data() + (static_cast<int64_t>(b) * n_q) * e + head * hd;
      const S* kb = cache.k.data() + (static_cast<int64_t>(b) * n_kv) * e + head * hd;
      const S* vb = cache.v.data() + (static_cast<int64_t>(b) * n_kv) * e + head * hd;
      S* pb = cache.probs.data() +
              ((static_cast<int64_t>(b) * h + head) * n_q) * n_kv;
      Eigen::Map<const MatrixRM<S>, 0, Stride> Q(qb, n_q, hd, Stride(e, 1));
      Eigen::Map<const MatrixRM<S>, 0, Stride> K(kb, n_kv, hd, Stride(e, 1));
      Eigen::Map<const MatrixRM<S>, 0, Stride> V(vb, n_kv, hd, Stride(e, 1));
      MatMap<S> P(pb, n_q, n_kv);
      P.noalias() = (Q * K.transpose()) * scale;
      softmax_rows(pb, n_q, n_kv);
      S* ob = cache.concat.data() + (static_cast<int64_t>(b) * n_q) * e + head * hd;
      Eigen::Map<MatrixRM<S>, 0, Stride> O(ob, n_q, hd, Stride(e, 1));
      O.noalias() = P * V;
    }
  }
  linear_forward(cache.concat.data(), rq, e, e, ps.at(p.wo).tensor.v.data(),
                 ps.at(p.bo).tensor.v.data(), y);
}

/// dx_q is overwritten; dx_kv is accumulated (cross-attention layers add
/// their memory gradients together).
template <typename S>
inline void attention_backward(const ParameterSet<S>& ps, Grads<S>& gr,
                               const AttentionParams<S>& p,
                               const AttentionCache<S>& cache, const S* dy,
                               S* dx_q, S* dx_kv, std::vector<S>& scratch) {
  const int e = p.dims.embed;
  const int h = p.dims.heads;
  const int hd = p.dims.head_dim();
  const int batch = cache.batch;
  const int n_q = cache.n_q;
  const int n_kv = cache.n_kv;
  const int rq = batch * n_q;
  const int rkv = batch * n_kv;

  // through the output projection
  scratch.assign(static_cast<size_t>(rq) * e          // d_concat
                     + static_cast<size_t>(rq) * e    // dq
                     + static_cast<size_t>(rkv) * e   // dk
                     + static_cast<size_t>(rkv) * e   // dv
                     + static_cast<size_t>(n_q) * n_kv * 2,
                 S(0));
  S* d_concat = scratch.data();
  S* dq = d_concat + static_cast<size_t>(rq) * e;
  S* dk = dq + static_cast<size_t>(rq) * e;
  S* dv = dk + static_cast<size_t>(rkv) * e;
  S* dp_buf = dv + static_cast<size_t>(rkv) * e;
  S* ds_buf = dp_buf + static_cast<size_t>(n_q) * n_kv;

  linear_backward(cache.concat.data(), ps.at(p.wo).tensor.v.data(), dy, rq, e,
                  e, d_concat, gr.of(p.wo), gr.of(p.bo));

  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(hd)));
  using Stride = Eigen::Stride<Eigen::Dynamic, 1>;
  for (int b = 0; b < batch; ++b) {
    for (int head = 0; head < h; ++head) {
      const int64_t qoff = (static_cast<int64_t>(b) * n_q) * e + head * hd;
      const int64_t kvoff = (static_cast<int64_t>(b) * n_kv) * e + head * hd;
      const S* pb = cache.probs.data() +
                    ((static_cast<int64_t>(b) * h + head) * n_q) * n_kv;
      Eigen::Map<const MatrixRM<S>, 0, Stride> Q(cache.q.data() + qoff, n_q, hd, Stride(e, 1));
      Eigen::Map<const MatrixRM<S>, 0, Stride> K(cache.k.data() + kvoff, n_kv, hd, Stride(e, 1));
      Eigen::Map<const MatrixRM<S>, 0, Stride> V(cache.v.data() + kvoff, n_kv, hd, Stride(e, 1));
      Eigen::Map<const MatrixRM<S>, 0, Stride> dO(d_concat + qoff, n_q, hd, Stride(e, 1));
      ConstMatMap<S> P(pb, n_q, n_kv);

      MatMap<S> dP(dp_buf, n_q, n_kv);
      dP.noalias() = dO * V.transpose();
      softmax_backward_rows(pb, dp_buf, n_q, n_kv, ds_buf);
      ConstMatMap<S> dS(ds_buf, n_q, n_kv);

      Eigen::Map<MatrixRM<S>, 0, Stride> dQ(dq + qoff, n_q, hd, Stride(e, 1));
      Eigen::Map<MatrixRM<S>, 0, Stride> dK(dk + kvoff, n_kv, hd, Stride(e, 1));
      Eigen::Map<MatrixRM<S>, 0, Stride> dV(dv + kvoff, n_kv, hd, Stride(e, 1));
      dQ.noalias() = dS * K * scale;
      dK.noalias() = dS.transpose() * Q * scale;
      dV.noalias() = P.transpose() * dO;
    }
  }

  // back through the Q/K/V projections
  linear_backward(cache.x_q, ps.at(p.wq).tensor.v.data(), dq, rq, e, e, dx_q,
                  gr.of(p.wq), gr.of(p.bq));
  // K and V share x_kv: accumulate both contributions
  std::vector<S> dxkv_tmp(static_cast<size_t>(rkv) * e, S(0));
  linear_backward(cache.x_kv, ps.at(p.wk).tensor.v.data(), dk, rkv, e, e,
                  dxkv_tmp.data(), gr.of(p.wk), gr.of(p.bk));
  MatMap<S>(dx_kv, rkv, e) += ConstMatMap<S>(dxkv_tmp.data(), rkv, e);
  linear_backward(cache.x_kv, ps.at(p.wv).tensor.v.data(), dv, rkv, e, e,
                  dxkv_tmp.data(), gr.of(p.wv), gr.of(p.bv));
  MatMap<S>(dx_kv, rkv, e) += ConstMatMap<S>(dxkv_tmp.data(), rkv, e);
}

// ---- losses ----

/// Chunk regression loss: mean over chunk rows of the squared L2 norm across
/// action channels. Returns the loss; writes dL/dpred if requested.
template <typename S>
inline double mse_chunk_loss(const S* pred, const S* gt, int chunk_len,
                             int channels, S* dpred = nullptr) {
  double loss = 0.0;
  const double inv = 1.0 / chunk_len;
  for (int64_t i = 0; i < static_cast<int64_t>(chunk_len) * channels; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    loss += d * d;
    if (dpred != nullptr) dpred[i] = static_cast<S>(2.0 * d * inv);
  }
  return loss * inv;
}

template <typename S>
inline double l1_chunk_loss(const S* pred, const S* gt, int chunk_len,
                            int channels, S* dpred = nullptr) {
  double loss = 0.0;
  const double inv = 1.0 / chunk_len;
  for (int64_t i = 0; i < static_cast<int64_t>(chunk_len) * channels; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    loss += std::abs(d);
    if (dpred != nullptr)
      dpred[i] = static_cast<S>((d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv);
  }
  return loss * inv;
}

// ---- optimizer ----

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  template <class V>
  void fields(V&& v) {
    v("lr", lr);
    v("beta1", beta1);
    v("beta2", beta2);
    v("eps", eps);
    v("weight_decay", weight_decay);
  }
};

/// Bias-corrected Adam with decoupled weight decay.
template <typename S>
inline void adam_step(ParameterSet<S>& ps, const AdamConfig& cfg) {
  ps.adam_step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(ps.adam_step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(ps.adam_step));
  for (auto& e : ps.entries) {
    auto& p = e.tensor.v;
    auto& g = e.tensor.g;
    if (g.size() != p.size()) throw std::runtime_error("missing gradient for " + e.name);
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double m = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * gi;
      const double v = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * gi * gi;
      e.m[i] = static_cast<S>(m);
      e.v[i] = static_cast<S>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p[i] = static_cast<S>(
          p[i] - cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) +
                           cfg.weight_decay * p[i]));
    }
  }
}

// ---- MLP ----

template <typename S>
struct Mlp {
  std::vector<int> weight_idx;
  std::vector<int> bias_idx;
  std::vector<int> dims;  // in, hidden..., out

  static Mlp create(ParameterSet<S>& ps, const std::string& prefix,
                    const std::vector<int>& dims, Rng& rng,
                    double final_layer_scale = 1.0) {
    if (dims.size() < 2) throw std::invalid_argument("mlp needs >= 2 dims");
    Mlp m;
    m.dims = dims;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
      const int in = dims[l], out = dims[l + 1];
      int w = ps.add(prefix + ".w" + std::to_string(l), {in, out});
      xavier_uniform(ps.at(w).tensor, in, out, rng);
      if (l + 2 == dims.size() && final_layer_scale != 1.0) {
        for (auto& x : ps.at(w).tensor.v)
          x = static_cast<S>(x * final_layer_scale);
      }
      int b = ps.add(prefix + ".b" + std::to_string(l), {out});
      m.weight_idx.push_back(w);
      m.bias_idx.push_back(b);
    }
    return m;
  }

  int in_dim() const { return dims.front(); }
  int out_dim() const { return dims.back(); }
  int layers() const { return static_cast<int>(weight_idx.size()); }

  /// Activations cache for backward: pre-activation inputs per layer.
  struct Cache {
    std::vector<std::vector<S>> acts;  // acts[0]=input copy, acts[l]=post-ELU
    int rows = 0;
  };

  /// ELU between hidden layers, linear final layer.
  void forward(const ParameterSet<S>& ps, const S* x, int rows, S* y,
               Cache* cache = nullptr) const {
    std::vector<S> cur(x, x + static_cast<int64_t>(rows) * in_dim());
    if (cache != nullptr) {
      cache->rows = rows;
      cache->acts.assign(1, cur);
    }
    const int L = layers();
    std::vector<S> next;
    for (int l = 0; l < L; ++l) {
      const int in = dims[static_cast<size_t>(l)];
      const int out = dims[static_cast<size_t>(l) + 1];
      next.assign(static_cast<size_t>(rows) * out, S(0));
      linear_forward(cur.data(), rows, in, out,
                     ps.at(weight_idx[static_cast<size_t>(l)]).tensor.v.data(),
                     ps.at(bias_idx[static_cast<size_t>(l)]).tensor.v.data(),
                     next.data());
      if (l + 1 < L) {
        elu_forward(next.data(), static_cast<int64_t>(rows) * out, next.data());
      }
      if (cache != nullptr && l + 1 < L) cache->acts.push_back(next);
      cur.swap(next);
    }
    std::copy(cur.begin(), cur.end(), y);
  }

  /// dx may be null when input gradients are not needed.
  void backward(const ParameterSet<S>& ps, Grads<S>& gr, const Cache& cache,
                const S* dy, S* dx = nullptr) const {
    const int rows = cache.rows;
    const int L = layers();
    std::vector<S> dcur(dy, dy + static_cast<int64_t>(rows) * out_dim());
    std::vector<S> dprev;
    for (int l = L - 1; l >= 0; --l) {
      const int in = dims[static_cast<size_t>(l)];
      const int out = dims[static_cast<size_t>(l) + 1];
      const auto& x_in = cache.acts[static_cast<size_t>(l)];
      const bool need_dx = l > 0 || dx != nullptr;
      dprev.assign(static_cast<size_t>(rows) * in, S(0));
      linear_backward(x_in.data(),
                      ps.at(weight_idx[static_cast<size_t>(l)]).tensor.v.data(),
                      dcur.data(), rows, in, out,
                      need_dx ? dprev.data() : nullptr,
                      gr.of(weight_idx[static_cast<size_t>(l)]),
                      gr.of(bias_idx[static_cast<size_t>(l)]));
      if (l > 0) {
        // x_in is the post-ELU activation of layer l-1
        elu_backward(x_in.data(), dprev.data(),
                     static_cast<int64_t>(rows) * in, dprev.data());
      }
      dcur.swap(dprev);
    }
    if (dx != nullptr) std::copy(dcur.begin(), dcur.end(), dx);
  }
};

// ---- transformer decoder ----

template <typename S>
struct LayerNormParams {
  int gamma = -1, beta = -1;
  int dim = 0;

  static LayerNormParams create(ParameterSet<S>& ps, const std::string& prefix,
                                int dim) {
    LayerNormParams p;
    p.dim = dim;
    p.gamma = ps.add(prefix + ".gamma", {dim});
    std::fill(ps.at(p.gamma).tensor.v.begin(), ps.at(p.gamma).tensor.v.end(), S(1));
    p.beta = ps.add(prefix + ".beta", {dim});
    return p;
  }
};

template <typename S>
struct LayerNormCache {
  std::vector<S> mean, rstd;
  const S* x = nullptr;
  int rows = 0;
};

template <typename S>
inline void ln_forward(const ParameterSet<S>& ps, const LayerNormParams<S>& p,
                       const S* x, int rows, LayerNormCache<S>& cache, S* y) {
  cache.x = x;
  cache.rows = rows;
  cache.mean.resize(static_cast<size_t>(rows));
  cache.rstd.resize(static_cast<size_t>(rows));
  layernorm_forward(x, rows, p.dim, ps.at(p.gamma).tensor.v.data(),
                    ps.at(p.beta).tensor.v.data(), y, cache.mean.data(),
                    cache.rstd.data());
}

template <typename S>
inline void ln_backward(const ParameterSet<S>& ps, Grads<S>& gr,
                        const LayerNormParams<S>& p,
                        const LayerNormCache<S>& cache, const S* dy, S* dx) {
  layernorm_backward(cache.x, ps.at(p.gamma).tensor.v.data(),
                     cache.mean.data(), cache.rstd.data(), dy, cache.rows,
                     p.dim, dx, gr.of(p.gamma), gr.of(p.beta));
}

/// Pre-norm decoder block: self-attention, cross-attention to the memory,
/// position-wise feed-forward; residual around each sublayer.
template <typename S>
struct DecoderBlock {
  LayerNormParams<S> ln1, ln2, ln3;
  AttentionParams<S> self_attn, cross_attn;
  int ff_w1 = -1, ff_b1 = -1, ff_w2 = -1, ff_b2 = -1;
  int embed = 0, ff = 0;

  static DecoderBlock create(ParameterSet<S>& ps, const std::string& prefix,
                             int embed, int heads, int ff, Rng& rng) {
    DecoderBlock b;
    b.embed = embed;
    b.ff = ff;
    b.ln1 = LayerNormParams<S>::create(ps, prefix + ".ln1", embed);
    b.self_attn = AttentionParams<S>::create(ps, prefix + ".self", embed, heads, rng);
    b.ln2 = LayerNormParams<S>::create(ps, prefix + ".ln2", embed);
    b.cross_attn = AttentionParams<S>::create(ps, prefix + ".cross", embed, heads, rng);
    b.ln3 = LayerNormParams<S>::create(ps, prefix + ".ln3", embed);
    b.ff_w1 = ps.add(prefix + ".ff.w1", {embed, ff});
    xavier_uniform(ps.at(b.ff_w1).tensor, embed, ff, rng);
    b.ff_b1 = ps.add(prefix + ".ff.b1", {ff});
    b.ff_w2 = ps.add(prefix + ".ff.w2", {ff, embed});
    xavier_uniform(ps.at(b.ff_w2).tensor, ff, embed, rng);
    b.ff_b2 = ps.add(prefix + ".ff.b2", {embed});
    return b;
  }

  struct Cache {
    LayerNormCache<S> c_ln1, c_ln2, c_ln3;
    AttentionCache<S> c_self, c_cross;
    std::vector<S> x_in;       // block input (residual base)
    std::vector<S> ln1_out, self_out, x_after_self;
    std::vector<S> ln2_out, cross_out, x_after_cross;
    std::vector<S> ln3_out, ff_pre, ff_act, ff_out;
    int rows = 0;
  };

  void forward(const ParameterSet<S>& ps, const S* x, const S* memory,
               int batch, int n_q, int n_kv, Cache& c, S* y) const {
    const int rows = batch * n_q;
    c.rows = rows;
    const size_t ne = static_cast<size_t>(rows) * embed;
    c.x_in.assign(x, x + ne);
    c.ln1_out.resize(ne);
    c.self_out.resize(ne);
    c.x_after_self.resize(ne);
    c.ln2_out.resize(ne);
    c.cross_out.resize(ne);
    c.x_after_cross.resize(ne);
    c.ln3_out.resize(ne);
    c.ff_pre.resize(static_cast<size_t>(rows) * ff);
    c.ff_act.resize(static_cast<size_t>(rows) * ff);
    c.ff_out.resize(ne);

    ln_forward(ps, ln1, c.x_in.data(), rows, c.c_ln1, c.ln1_out.data());
    attention_forward(ps, self_attn, c.ln1_out.data(), c.ln1_out.data(), batch,
                      n_q, n_q, c.c_self, c.self_out.data());
    for (size_t i = 0; i < ne; ++i) c.x_after_self[i] = c.x_in[i] + c.self_out[i];

    ln_forward(ps, ln2, c.x_after_self.data(), rows, c.c_ln2, c.ln2_out.data());
    attention_forward(ps, cross_attn, c.ln2_out.data(), memory, batch, n_q,
                      n_kv, c.c_cross, c.cross_out.data());
    for (size_t i = 0; i < ne; ++i)
      c.x_after_cross[i] = c.x_after_self[i] + c.cross_out[i];

    ln_forward(ps, ln3, c.x_after_cross.data(), rows, c.c_ln3, c.ln3_out.data());
    linear_forward(c.ln3_out.data(), rows, embed, ff,
                   ps.at(ff_w1).tensor.v.data(), ps.at(ff_b1).tensor.v.data(),
                   c.ff_pre.data());
    gelu_forward(c.ff_pre.data(), static_cast<int64_t>(rows) * ff, c.ff_act.data());
    linear_forward(c.ff_act.data(), rows, ff, embed,
                   ps.at(ff_w2).tensor.v.data(), ps.at(ff_b2).tensor.v.data(),
                   c.ff_out.data());
    for (size_t i = 0; i < ne; ++i) y[i] = c.x_after_cross[i] + c.ff_out[i];
  }

  /// dmemory is accumulated; dx is overwritten.
  void backward(const ParameterSet<S>& ps, Grads<S>& gr, const Cache& c,
                const S* dy, S* dx, S* dmemory,
                std::vector<S>& scratch) const {
    const int rows = c.rows;
    const size_t ne = static_cast<size_t>(rows) * embed;
    std::vector<S> d_after_cross(dy, dy + ne);
    std::vector<S> dtmp(ne, S(0));
    std::vector<S> dff_act(static_cast<size_t>(rows) * ff, S(0));
    std::vector<S> dff_pre(static_cast<size_t>(rows) * ff, S(0));

    // feed-forward residual branch
    linear_backward(c.ff_act.data(), ps.at(ff_w2).tensor.v.data(), dy, rows,
                    ff, embed, dff_act.data(), gr.of(ff_w2), gr.of(ff_b2));
    gelu_backward(c.ff_pre.data(), dff_act.data(),
                  static_cast<int64_t>(rows) * ff, dff_pre.data());
    std::vector<S> dln3(ne, S(0));
    linear_backward(c.ln3_out.data(), ps.at(ff_w1).tensor.v.data(),
                    dff_pre.data(), rows, embed, ff, dln3.data(), gr.of(ff_w1),
                    gr.of(ff_b1));
    ln_backward(ps, gr, ln3, c.c_ln3, dln3.data(), dtmp.data());
    for (size_t i = 0; i < ne; ++i) d_after_cross[i] += dtmp[i];

    // cross-attention residual branch
    std::vector<S> d_after_self(d_after_cross);
    std::vector<S> dln2(ne, S(0));
    attention_backward(ps, gr, cross_attn, c.c_cross, d_after_cross.data(),
                       dln2.data(), dmemory, scratch);
    ln_backward(ps, gr, ln2, c.c_ln2, dln2.data(), dtmp.data());
    for (size_t i = 0; i < ne; ++i) d_after_self[i] += dtmp[i];

    // self-attention residual branch
    std::vector<S> dx_total(d_after_self);
    std::vector<S> dln1_q(ne, S(0));
    std::vector<S> dln1_kv(ne, S(0));
    attention_backward(ps, gr, self_attn, c.c_self, d_after_self.data(),
                       dln1_q.data(), dln1_kv.data(), scratch);
    for (size_t i = 0; i < ne; ++i) dln1_q[i] += dln1_kv[i];
    ln_backward(ps, gr, ln1, c.c_ln1, dln1_q.data(), dtmp.data());
    for (size_t i = 0; i < ne; ++i) dx_total[i] += dtmp[i];
    std::copy(dx_total.begin(), dx_total.end(), dx);
  }
};

// ---- checkpoint io ----

template <typename S>
inline std::string save_parameters(const ParameterSet<S>& ps,
                                   const nlohmann::json& meta,
                                   const std::string& kind) {
  Container c;
  c.magic = "crossnav-checkpoint";
  c.version = 1;
  nlohmann::json tensors = nlohmann::json::array();
  ByteWriter payload;
  for (const auto& e : ps.entries) {
    tensors.push_back({{"name", e.name}, {"shape", e.tensor.shape}});
    for (S x : e.tensor.v) payload.f32(static_cast<float>(x));
  }
  c.header = {{"kind", kind}, {"meta", meta}, {"tensors", tensors}};
  c.payload = payload.data();
  return container_to_bytes(c);
}

/// Restores values into a ParameterSet with identical structure.
template <typename S>
inline nlohmann::json load_parameters(ParameterSet<S>& ps,
                                      const std::string& bytes,
                                      const std::string& expect_kind) {
  Container c = container_from_bytes(bytes, "crossnav-checkpoint");
  if (c.header.at("kind").get<std::string>() != expect_kind)
    throw std::runtime_error("checkpoint kind mismatch: expected " +
                             expect_kind);
  const auto& tensors = c.header.at("tensors");
  if (tensors.size() != ps.entries.size())
    throw std::runtime_error("checkpoint tensor count mismatch");
  ByteReader r(c.payload);
  for (size_t i = 0; i < ps.entries.size(); ++i) {
    auto& e = ps.entries[i];
    if (tensors[i].at("name").get<std::string>() != e.name)
      throw std::runtime_error("checkpoint tensor name mismatch at " + e.name);
    if (tensors[i].at("shape").get<std::vector<int>>() != e.tensor.shape)
      throw std::runtime_error("checkpoint tensor shape mismatch at " + e.name);
    for (auto& x : e.tensor.v) x = static_cast<S>(r.f32());
  }
  return c.header.at("meta");
}

}  // namespace crossnav::nn
