// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ichor/errors.hpp"
#include "ichor/mat.hpp"
#include "ichor/rng.hpp"

namespace ichor {

inline constexpr double kNormEps = 1e-6;

template <class T>
void ensure_finite(const Mat<T>& m, const std::string& name) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + name);
}

template <class T>
void trunc_normal_fill(Mat<T>& m, Rng& rng, double stddev) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<T>(rng.trunc_normal(stddev));
}

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

template <class T>
struct Linear {
  Mat<T> w;  // in x out
  Mat<T> b;  // 1 x out

  void resize(int in, int out) {
    w.setZero(in, out);
    b.setZero(1, out);
  }
};

template <class T>
struct Norm {
  Mat<T> gamma;  // 1 x d
  Mat<T> beta;   // 1 x d

  void resize(int d) {
    gamma.setOnes(1, d);
    beta.setZero(1, d);
  }
};

/// Low-rank adapter for one projection: y += (alpha/r) * drop(x) * down * up.
template <class T>
struct LoraPair {
  Mat<T> down;  // in x r
  Mat<T> up;    // r x out
  double alpha = 0.0;
  double dropout_p = 0.0;

  void resize(int in, int out, int rank) {
    down.setZero(in, rank);
    up.setZero(rank, out);
  }
  int rank() const { return static_cast<int>(down.cols()); }
  T scale() const { return static_cast<T>(alpha / static_cast<double>(rank())); }
};

// ---------------------------------------------------------------------------
// Elementwise pieces
// ---------------------------------------------------------------------------

template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(M_SQRT1_2)));
}

template <class T>
T gelu_grad(T x) {
  const T phi = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
  return T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2))) + x * phi;
}

/// Row-wise softmax; sums are accumulated in double regardless of T.
template <class T>
void softmax_rows_inplace(Mat<T>& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    T* row = s.data() + r * s.cols();
    T m = row[0];
    for (Eigen::Index c = 1; c < s.cols(); ++c) m = std::max(m, row[c]);
    double sum = 0.0;
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      const double e = std::exp(static_cast<double>(row[c] - m));
      sum += e;
      row[c] = static_cast<T>(e);
    }
    const T inv = static_cast<T>(1.0 / sum);
    for (Eigen::Index c = 0; c < s.cols(); ++c) row[c] *= inv;
  }
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

template <class T>
struct NormCache {
  Mat<T> xhat;
  Vec<T> inv_std;
};

template <class T>
Mat<T> norm_fwd(const Mat<T>& x, const Norm<T>& n, NormCache<T>* cache) {
  const Eigen::Index d = x.cols();
  Mat<T> xhat(x.rows(), d);
  Vec<T> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().sum() / static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
    xhat.row(r) = (x.row(r).array() - mean) * is;
    inv_std(r) = is;
  }
  Mat<T> y = (xhat.array().rowwise() * n.gamma.row(0).array()).rowwise() + n.beta.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <class T>
Mat<T> norm_bwd(const Mat<T>& dy, const Norm<T>& n, const NormCache<T>& cache, Norm<T>* dn) {
  const Eigen::Index d = dy.cols();
  if (dn) {
    dn->gamma.row(0).array() += (dy.array() * cache.xhat.array()).colwise().sum();
    dn->beta.row(0).array() += dy.array().colwise().sum();
  }
  Mat<T> dxhat = dy.array().rowwise() * n.gamma.row(0).array();
  Mat<T> dx(dy.rows(), d);
  const T inv_d = T(1) / static_cast<T>(d);
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T s1 = dxhat.row(r).sum();
    const T s2 = (dxhat.row(r).array() * cache.xhat.row(r).array()).sum();
    dx.row(r) =
        cache.inv_std(r) * inv_d *
        (static_cast<T>(d) * dxhat.row(r).array() - s1 - cache.xhat.row(r).array() * s2);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear with optional low-rank adapter
// ---------------------------------------------------------------------------

template <class T>
struct LoraState {
  Mat<T> dropped;  // adapter input after dropout scaling
  Mat<T> mid;      // dropped * down
  bool active = false;
  bool dropout_applied = false;
};

template <class T>
Mat<T> lora_linear_fwd(const Mat<T>& x, const Linear<T>& lin, const LoraPair<T>* ad,
                       bool training, Rng* rng, LoraState<T>* state) {
  Mat<T> y = (x * lin.w).rowwise() + lin.b.row(0);
  if (state) state->active = false;
  if (!ad) return y;

  Mat<T> dropped;
  const bool drop = training && ad->dropout_p > 0.0;
  if (drop) {
    if (!rng) throw InternalError("adapter dropout needs an rng in training mode");
    const T keep_inv = static_cast<T>(1.0 / (1.0 - ad->dropout_p));
    dropped = x;
    for (Eigen::Index r = 0; r < dropped.rows(); ++r)
      for (Eigen::Index c = 0; c < dropped.cols(); ++c)
        dropped(r, c) = rng->uniform() < ad->dropout_p ? T(0) : dropped(r, c) * keep_inv;
  } else {
    dropped = x;
  }
  Mat<T> mid = dropped * ad->down;
  y.noalias() += ad->scale() * (mid * ad->up);
  if (state) {
    state->dropped = std::move(dropped);
    state->mid = std::move(mid);
    state->active = true;
    state->dropout_applied = drop;
  }
  return y;
}

template <class T>
Mat<T> lora_linear_bwd(const Mat<T>& dy, const Mat<T>& x, const Linear<T>& lin,
                       const LoraPair<T>* ad, const LoraState<T>* state, Linear<T>* dlin,
                       LoraPair<T>* dad) {
  if (dlin) {
    dlin->w.noalias() += x.transpose() * dy;
    dlin->b.row(0).array() += dy.array().colwise().sum();
  }
  Mat<T> dx = dy * lin.w.transpose();
  if (ad) {
    if (!state || !state->active) throw InternalError("adapter backward needs a forward state");
    const T s = ad->scale();
    Mat<T> dmid = s * (dy * ad->up.transpose());
    if (dad) {
      dad->up.noalias() += s * (state->mid.transpose() * dy);
      dad->down.noalias() += state->dropped.transpose() * dmid;
    }
    Mat<T> ddropped = dmid * ad->down.transpose();
    if (state->dropout_applied) {
      const T keep_inv = static_cast<T>(1.0 / (1.0 - ad->dropout_p));
      for (Eigen::Index r = 0; r < ddropped.rows(); ++r)
        for (Eigen::Index c = 0; c < ddropped.cols(); ++c)
          ddropped(r, c) = state->dropped(r, c) == T(0) ? T(0) : ddropped(r, c) * keep_inv;
    }
    dx += ddropped;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Multi-head self-attention
// ---------------------------------------------------------------------------

template <class T>
struct AttnWeights {
  Linear<T> q, k, v, o;
};

template <class T>
struct AttnAdapters {
  LoraPair<T> q, k, v, o;
};

template <class T>
struct AttnCache {
  Mat<T> q, k, v;             // N x d projections
  std::vector<Mat<T>> probs;  // per-head softmax, N x N
  Mat<T> concat;              // head outputs, N x d
  LoraState<T> sq, sk, sv, so;
};

template <class T>
Mat<T> attention_fwd(const Mat<T>& xn, const AttnWeights<T>& w, int heads,
                     const AttnAdapters<T>* ad, bool training, Rng* rng, AttnCache<T>& cache) {
  const Eigen::Index n = xn.rows();
  const Eigen::Index d = xn.cols();
  const Eigen::Index dh = d / heads;
  cache.q = lora_linear_fwd(xn, w.q, ad ? &ad->q : nullptr, training, rng, &cache.sq);
  cache.k = lora_linear_fwd(xn, w.k, ad ? &ad->k : nullptr, training, rng, &cache.sk);
  cache.v = lora_linear_fwd(xn, w.v, ad ? &ad->v : nullptr, training, rng, &cache.sv);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  cache.probs.assign(heads, Mat<T>());
  cache.concat.resize(n, d);
  for (int h = 0; h < heads; ++h) {
    auto qh = cache.q.middleCols(h * dh, dh);
    auto kh = cache.k.middleCols(h * dh, dh);
    auto vh = cache.v.middleCols(h * dh, dh);
    Mat<T> scores = scale * (qh * kh.transpose());
    softmax_rows_inplace(scores);
    cache.concat.middleCols(h * dh, dh).noalias() = scores * vh;
    cache.probs[h] = std::move(scores);
  }
  return lora_linear_fwd(cache.concat, w.o, ad ? &ad->o : nullptr, training, rng, &cache.so);
}

template <class T>
Mat<T> attention_bwd(const Mat<T>& dy, const Mat<T>& xn, const AttnWeights<T>& w, int heads,
                     const AttnAdapters<T>* ad, const AttnCache<T>& cache, AttnWeights<T>* dw,
                     AttnAdapters<T>* dad) {
  const Eigen::Index d = xn.cols();
  const Eigen::Index dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Mat<T> dconcat =
      lora_linear_bwd(dy, cache.concat, w.o, ad ? &ad->o : nullptr, &cache.so,
                      dw ? &dw->o : nullptr, dad ? &dad->o : nullptr);
  Mat<T> dq(xn.rows(), d), dk(xn.rows(), d), dv(xn.rows(), d);
  for (int h = 0; h < heads; ++h) {
    auto qh = cache.q.middleCols(h * dh, dh);
    auto kh = cache.k.middleCols(h * dh, dh);
    auto vh = cache.v.middleCols(h * dh, dh);
    const Mat<T>& p = cache.probs[h];
    auto dout = dconcat.middleCols(h * dh, dh);
    Mat<T> dp = dout * vh.transpose();
    dv.middleCols(h * dh, dh).noalias() = p.transpose() * dout;
    Vec<T> rs = (dp.array() * p.array()).rowwise().sum();
    Mat<T> ds = (p.array() * (dp.array().colwise() - rs.array())).matrix();
    dq.middleCols(h * dh, dh).noalias() = scale * (ds * kh);
    dk.middleCols(h * dh, dh).noalias() = scale * (ds.transpose() * qh);
  }
  Mat<T> dxn = lora_linear_bwd(dq, xn, w.q, ad ? &ad->q : nullptr, &cache.sq,
                               dw ? &dw->q : nullptr, dad ? &dad->q : nullptr);
  dxn += lora_linear_bwd(dk, xn, w.k, ad ? &ad->k : nullptr, &cache.sk, dw ? &dw->k : nullptr,
                         dad ? &dad->k : nullptr);
  dxn += lora_linear_bwd(dv, xn, w.v, ad ? &ad->v : nullptr, &cache.sv, dw ? &dw->v : nullptr,
                         dad ? &dad->v : nullptr);
  return dxn;
}

// ---------------------------------------------------------------------------
// Pre-norm transformer block
// ---------------------------------------------------------------------------

template <class T>
struct BlockWeights {
  Norm<T> ln1, ln2;
  AttnWeights<T> attn;
  Linear<T> fc1, fc2;

  void resize(int d, int mlp_dim) {
    ln1.resize(d);
    ln2.resize(d);
    attn.q.resize(d, d);
    attn.k.resize(d, d);
    attn.v.resize(d, d);
    attn.o.resize(d, d);
    fc1.resize(d, mlp_dim);
    fc2.resize(mlp_dim, d);
  }
};

template <class T>
struct BlockAdapters {
  AttnAdapters<T> attn;
};

template <class T>
struct BlockCache {
  Mat<T> x;    // block input
  Mat<T> xn1;  // ln1 output
  NormCache<T> n1, n2;
  AttnCache<T> attn;
  Mat<T> r1;   // x + attention
  Mat<T> xn2;  // ln2 output
  Mat<T> mlp_pre;
  Mat<T> mlp_act;
};

template <class T>
Mat<T> block_fwd(const Mat<T>& x, const BlockWeights<T>& w, int heads, const BlockAdapters<T>* ad,
                 bool training, Rng* rng, BlockCache<T>& cache) {
  cache.x = x;
  cache.xn1 = norm_fwd(x, w.ln1, &cache.n1);
  Mat<T> attn_out =
      attention_fwd(cache.xn1, w.attn, heads, ad ? &ad->attn : nullptr, training, rng, cache.attn);
  cache.r1 = x + attn_out;
  cache.xn2 = norm_fwd(cache.r1, w.ln2, &cache.n2);
  cache.mlp_pre = (cache.xn2 * w.fc1.w).rowwise() + w.fc1.b.row(0);
  cache.mlp_act = cache.mlp_pre.unaryExpr([](T v) { return gelu(v); });
  Mat<T> y = cache.r1 + ((cache.mlp_act * w.fc2.w).rowwise() + w.fc2.b.row(0)).eval();
  return y;
}

template <class T>
Mat<T> block_bwd(const Mat<T>& dy, const BlockWeights<T>& w, int heads, const BlockAdapters<T>* ad,
                 const BlockCache<T>& cache, BlockWeights<T>* dw, BlockAdapters<T>* dad) {
  if (dw) {
    dw->fc2.w.noalias() += cache.mlp_act.transpose() * dy;
    dw->fc2.b.row(0).array() += dy.array().colwise().sum();
  }
  Mat<T> dact = dy * w.fc2.w.transpose();
  Mat<T> dpre =
      dact.array() * cache.mlp_pre.unaryExpr([](T v) { return gelu_grad(v); }).array();
  if (dw) {
    dw->fc1.w.noalias() += cache.xn2.transpose() * dpre;
    dw->fc1.b.row(0).array() += dpre.array().colwise().sum();
  }
  Mat<T> dxn2 = dpre * w.fc1.w.transpose();
  Mat<T> dr1 = norm_bwd(dxn2, w.ln2, cache.n2, dw ? &dw->ln2 : nullptr);
  dr1 += dy;  // residual
  Mat<T> dxn1 = attention_bwd(dr1, cache.xn1, w.attn, heads, ad ? &ad->attn : nullptr, cache.attn,
                              dw ? &dw->attn : nullptr, dad ? &dad->attn : nullptr);
  Mat<T> dx = norm_bwd(dxn1, w.ln1, cache.n1, dw ? &dw->ln1 : nullptr);
  dx += dr1;  // residual
  return dx;
}

}  // namespace ichor
