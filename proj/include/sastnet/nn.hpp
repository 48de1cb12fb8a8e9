// sastnet/nn.hpp
//
// Copyright 2026 The sastnet authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SASTNET_NN_HPP_
#define SASTNET_NN_HPP_

#include <string>
#include <map>
#include <unordered_map>
#include <vector>

#include "sastnet/graph.hpp"

namespace sastnet {

enum class Init { kZero, kOne, kXavier, kNormal };

// ---------------------------------------------------------------------------
// Parameter store. Every parameter draws its initializer from an independent
// substream keyed by its name, so creation order cannot change initial values.
// ---------------------------------------------------------------------------

template <class S>
struct ParamStore {
  struct Entry {
    std::string name;
    Mat<S> value;
    Mat<S> grad;
    Mat<S> m, v;  // AdamW moments, allocated on first step
    bool decay = true;
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, int> by_name;
  Rng init_rng{0};

  explicit ParamStore(Rng rng = Rng(0)) : init_rng(rng) {}

  int create(const std::string& name, Index rows, Index cols, Init init,
             bool decay, double scale = 0.02) {
    if (by_name.count(name)) throw ContractError("duplicate parameter: " + name);
    Entry e;
    e.name = name;
    e.decay = decay;
    e.value.resize(rows, cols);
    Rng rng = init_rng.derive(name);
    switch (init) {
      case Init::kZero:
        e.value.setZero();
        break;
      case Init::kOne:
        e.value.setOnes();
        break;
      case Init::kXavier: {
        const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (Index i = 0; i < rows; ++i)
          for (Index j = 0; j < cols; ++j)
            e.value(i, j) = static_cast<S>(rng.uniform(-a, a));
        break;
      }
      case Init::kNormal:
        for (Index i = 0; i < rows; ++i)
          for (Index j = 0; j < cols; ++j)
            e.value(i, j) = static_cast<S>(scale * rng.normal());
        break;
    }
    entries.push_back(std::move(e));
    const int id = static_cast<int>(entries.size()) - 1;
    by_name.emplace(name, id);
    return id;
  }

  Entry& entry(int i) { return entries[static_cast<std::size_t>(i)]; }
  const Entry& entry(int i) const { return entries[static_cast<std::size_t>(i)]; }

  int find(const std::string& name) const {
    auto it = by_name.find(name);
    return it == by_name.end() ? -1 : it->second;
  }

  Index scalar_count() const {
    Index n = 0;
    for (const auto& e : entries) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries)
      if (e.grad.size() > 0) e.grad.setZero();
  }

  std::uint64_t digest() const {
    Digest d;
    for (const auto& e : entries) {
      d.feed(e.name);
      d.feed_mat(e.value);
    }
    return d.value();
  }
};

// Maps parameters into a tape and pulls gradients back out. Each parameter
// is bound to exactly one leaf per tape; repeated uses share the node, so
// gradient accumulation happens on the tape. Entries are keyed by
// (store, index) so one binding can serve several parameter stores.
template <class S>
struct Binding {
  struct Use {
    const void* store;
    int param;
    int node;
  };
  std::vector<Use> uses;
  std::map<std::pair<const void*, int>, int> node_of;

  int use(Tape<S>& t, ParamStore<S>& ps, int param) {
    const auto key = std::make_pair(static_cast<const void*>(&ps), param);
    const auto it = node_of.find(key);
    if (it != node_of.end()) return it->second;
    const int node = t.leaf(ps.entry(param).value);
    node_of.emplace(key, node);
    uses.push_back({key.first, param, node});
    return node;
  }

  // Binds an existing tape node as a parameter (gradient checking hooks).
  void preset(const ParamStore<S>& ps, int param, int node) {
    const auto key = std::make_pair(static_cast<const void*>(&ps), param);
    node_of[key] = node;
    uses.push_back({key.first, param, node});
  }

  void accumulate(Tape<S>& t, ParamStore<S>& ps, double coeff = 1.0) const {
    for (const auto& u : uses) {
      if (u.store != static_cast<const void*>(&ps)) continue;
      if (!t.has_grad(u.node)) continue;
      auto& e = ps.entry(u.param);
      if (e.grad.size() == 0) e.grad = Mat<S>::Zero(e.value.rows(), e.value.cols());
      e.grad += static_cast<S>(coeff) * t.grad(u.node);
    }
  }
};

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay, bias correction and linear warmup.
// Entries flagged decay=false (biases, norms, tokens) skip the decay term.
// ---------------------------------------------------------------------------

struct OptimConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  int warmup_steps = 0;
};

template <class S>
void adamw_step(ParamStore<S>& ps, const OptimConfig& cfg, std::int64_t step) {
  if (step < 1) throw ContractError("adamw_step: step must be >= 1");
  const double warm =
      cfg.warmup_steps > 0
          ? std::min(1.0, static_cast<double>(step) / cfg.warmup_steps)
          : 1.0;
  const double lr_t = cfg.lr * warm;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (auto& e : ps.entries) {
    if (e.grad.size() == 0) continue;
    if (e.m.size() == 0) {
      e.m = Mat<S>::Zero(e.value.rows(), e.value.cols());
      e.v = Mat<S>::Zero(e.value.rows(), e.value.cols());
    }
    e.m = static_cast<S>(cfg.beta1) * e.m + static_cast<S>(1.0 - cfg.beta1) * e.grad;
    e.v = (static_cast<S>(cfg.beta2) * e.v.array() +
           static_cast<S>(1.0 - cfg.beta2) * e.grad.array().square())
              .matrix();
    const auto mhat = (e.m.array() / static_cast<S>(bc1)).eval();
    const auto vhat = (e.v.array() / static_cast<S>(bc2)).eval();
    e.value -=
        (static_cast<S>(lr_t) * mhat / (vhat.sqrt() + static_cast<S>(cfg.eps)))
            .matrix();
    if (e.decay && cfg.weight_decay > 0.0)
      e.value *= static_cast<S>(1.0 - lr_t * cfg.weight_decay);
  }
}

// ---------------------------------------------------------------------------
// Modules. Each holds parameter indices into a store and builds tape nodes on
// call; the same module can serve many tapes.
// ---------------------------------------------------------------------------

template <class S>
struct LinearM {
  int w = -1, b = -1;

  LinearM() = default;
  LinearM(ParamStore<S>& ps, const std::string& name, Index in, Index out,
          bool bias = true) {
    w = ps.create(name + ".w", in, out, Init::kXavier, true);
    if (bias) b = ps.create(name + ".b", 1, out, Init::kZero, false);
  }

  int operator()(Tape<S>& t, Binding<S>& bind, ParamStore<S>& ps, int x) const {
    int y = ops::matmul(t, x, bind.use(t, ps, w));
    if (b >= 0) y = ops::add_rowvec(t, y, bind.use(t, ps, b));
    return y;
  }
};

template <class S>
struct LayerNormM {
  int gamma = -1, beta = -1;

  LayerNormM() = default;
  LayerNormM(ParamStore<S>& ps, const std::string& name, Index dim) {
    gamma = ps.create(name + ".gamma", 1, dim, Init::kOne, false);
    beta = ps.create(name + ".beta", 1, dim, Init::kZero, false);
  }

  int operator()(Tape<S>& t, Binding<S>& bind, ParamStore<S>& ps, int x) const {
    return ops::layer_norm(t, x, bind.use(t, ps, gamma), bind.use(t, ps, beta));
  }
};

// Multi-head attention. Query and key/value inputs may have different widths;
// all heads share the d_model attention space. Per-head attention matrices
// (rows softmax-normalized over keys) can be captured for export.
template <class S>
struct MhaM {
  Index heads = 4;
  Index d_model = 64;
  LinearM<S> wq, wk, wv, wo;

  MhaM() = default;
  MhaM(ParamStore<S>& ps, const std::string& name, Index q_dim, Index kv_dim,
       Index d, Index n_heads)
      : heads(n_heads), d_model(d) {
    if (d % n_heads != 0)
      throw ContractError("MhaM: d_model must be divisible by heads");
    wq = LinearM<S>(ps, name + ".wq", q_dim, d);
    wk = LinearM<S>(ps, name + ".wk", kv_dim, d);
    wv = LinearM<S>(ps, name + ".wv", kv_dim, d);
    wo = LinearM<S>(ps, name + ".wo", d, d);
  }

  int operator()(Tape<S>& t, Binding<S>& bind, ParamStore<S>& ps, int q_in,
                 int kv_in, const Mat<S>* additive_mask = nullptr,
                 std::vector<Mat<S>>* capture = nullptr) const {
    const int q = wq(t, bind, ps, q_in);
    const int k = wk(t, bind, ps, kv_in);
    const int v = wv(t, bind, ps, kv_in);
    const Index dh = d_model / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<int> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (Index h = 0; h < heads; ++h) {
      const int qh = ops::slice_cols(t, q, h * dh, dh);
      const int kh = ops::slice_cols(t, k, h * dh, dh);
      const int vh = ops::slice_cols(t, v, h * dh, dh);
      int scores = ops::scale(t, ops::matmul_nt(t, qh, kh), inv_sqrt);
      if (additive_mask) {
        if (additive_mask->rows() != t.val(scores).rows() ||
            additive_mask->cols() != t.val(scores).cols())
          throw ContractError("MhaM: mask shape mismatch");
        scores = ops::add(t, scores, t.constant(*additive_mask));
      }
      const int attn = ops::softmax_rows(t, scores);
      if (capture) capture->push_back(t.val(attn));
      head_outs.push_back(ops::matmul(t, attn, vh));
    }
    const int merged = ops::concat_cols(t, head_outs);
    return wo(t, bind, ps, merged);
  }
};

// Pre-norm transformer encoder layer with GELU feed-forward.
template <class S>
struct EncoderLayerM {
  LayerNormM<S> ln1, ln2;
  MhaM<S> mha;
  LinearM<S> ff1, ff2;

  EncoderLayerM() = default;
  EncoderLayerM(ParamStore<S>& ps, const std::string& name, Index d,
                Index n_heads, Index d_ff) {
    ln1 = LayerNormM<S>(ps, name + ".ln1", d);
    ln2 = LayerNormM<S>(ps, name + ".ln2", d);
    mha = MhaM<S>(ps, name + ".mha", d, d, d, n_heads);
    ff1 = LinearM<S>(ps, name + ".ff1", d, d_ff);
    ff2 = LinearM<S>(ps, name + ".ff2", d_ff, d);
  }

  int operator()(Tape<S>& t, Binding<S>& bind, ParamStore<S>& ps, int x,
                 const Mat<S>* mask = nullptr,
                 std::vector<Mat<S>>* capture = nullptr) const {
    const int xn = ln1(t, bind, ps, x);
    const int h = mha(t, bind, ps, xn, xn, mask, capture);
    const int x1 = ops::add(t, x, h);
    const int f =
        ff2(t, bind, ps, ops::gelu(t, ff1(t, bind, ps, ln2(t, bind, ps, x1))));
    return ops::add(t, x1, f);
  }
};

// Pre-norm cross-attention layer: queries from x, keys/values from ctx.
template <class S>
struct CrossLayerM {
  LayerNormM<S> ln_q, ln_kv, ln2;
  MhaM<S> mha;
  LinearM<S> ff1, ff2;

  CrossLayerM() = default;
  CrossLayerM(ParamStore<S>& ps, const std::string& name, Index d,
              Index n_heads, Index d_ff) {
    ln_q = LayerNormM<S>(ps, name + ".ln_q", d);
    ln_kv = LayerNormM<S>(ps, name + ".ln_kv", d);
    ln2 = LayerNormM<S>(ps, name + ".ln2", d);
    mha = MhaM<S>(ps, name + ".mha", d, d, d, n_heads);
    ff1 = LinearM<S>(ps, name + ".ff1", d, d_ff);
    ff2 = LinearM<S>(ps, name + ".ff2", d_ff, d);
  }

  int operator()(Tape<S>& t, Binding<S>& bind, ParamStore<S>& ps, int x,
                 int ctx, std::vector<Mat<S>>* capture = nullptr) const {
    const int h = mha(t, bind, ps, ln_q(t, bind, ps, x),
                      ln_kv(t, bind, ps, ctx), nullptr, capture);
    const int x1 = ops::add(t, x, h);
    const int f =
        ff2(t, bind, ps, ops::gelu(t, ff1(t, bind, ps, ln2(t, bind, ps, x1))));
    return ops::add(t, x1, f);
  }
};

// ---------------------------------------------------------------------------
// Position encodings and masks.
// ---------------------------------------------------------------------------

template <class S>
Mat<S> sinusoidal_positions(Index length, Index dim) {
  Mat<S> pos(length, dim);
  for (Index p = 0; p < length; ++p)
    for (Index i = 0; i < dim; ++i) {
      const double exponent = 2.0 * static_cast<double>(i / 2) / static_cast<double>(dim);
      const double angle =
          static_cast<double>(p) / std::pow(10000.0, exponent);
      pos(p, i) = static_cast<S>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  return pos;
}

// 2-D grid encoding for patch tokens: first half encodes the time index,
// second half the channel index. dim must be even.
template <class S>
Mat<S> sinusoidal_positions_2d(Index t_p, Index f_p, Index dim) {
  if (dim % 2 != 0) throw ContractError("sinusoidal_positions_2d: dim must be even");
  const Mat<S> pt = sinusoidal_positions<S>(t_p, dim / 2);
  const Mat<S> pf = sinusoidal_positions<S>(f_p, dim / 2);
  Mat<S> pos(t_p * f_p, dim);
  for (Index t = 0; t < t_p; ++t)
    for (Index f = 0; f < f_p; ++f) {
      pos.row(t * f_p + f).head(dim / 2) = pt.row(t);
      pos.row(t * f_p + f).tail(dim / 2) = pf.row(f);
    }
  return pos;
}

// Additive causal mask: position i attends to positions <= i.
template <class S>
Mat<S> causal_mask(Index n) {
  Mat<S> m = Mat<S>::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) m(i, j) = static_cast<S>(-1e9);
  return m;
}

}  // namespace sastnet

#endif  // SASTNET_NN_HPP_
