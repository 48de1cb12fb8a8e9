// sastnet/graph.hpp
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

#ifndef SASTNET_GRAPH_HPP_
#define SASTNET_GRAPH_HPP_

#include <functional>
#include <vector>

#include "sastnet/core.hpp"

namespace sastnet {

// Reverse-mode tape over dense matrices. Nodes are created in topological
// order by construction; backward walks them in reverse. Scalars are 1x1
// matrices. Instantiated with float for training and double for gradient
// checks.
template <class S>
class Tape {
 public:
  using BackFn = std::function<void(Tape&)>;

  Tape() { nodes_.reserve(1024); }

  int constant(Mat<S> v) { return push(std::move(v), false, nullptr); }
  int leaf(Mat<S> v) { return push(std::move(v), true, nullptr); }

  int next_id() const { return static_cast<int>(nodes_.size()); }

  int push(Mat<S> v, bool needs_grad, BackFn back) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Mat<S>& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
  S scalar(int id) const {
    const Mat<S>& v = val(id);
    if (v.rows() != 1 || v.cols() != 1) throw ContractError("scalar: node is not 1x1");
    return v(0, 0);
  }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() > 0; }

  // Gradient of a node (zeros if never touched by backward).
  const Mat<S>& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Mat<S>::Zero(n.val.rows(), n.val.cols());
    return n.grad;
  }

  template <class Expr>
  void accum(int id, const Expr& delta) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = Mat<S>::Zero(n.val.rows(), n.val.cols());
    n.grad += delta;
  }

  void backward(int root) {
    Node& r = nodes_[static_cast<std::size_t>(root)];
    if (r.val.rows() != 1 || r.val.cols() != 1)
      throw ContractError("backward: root must be a scalar node");
    if (!r.needs_grad)
      throw ContractError("backward: root does not depend on any leaf");
    if (r.grad.size() == 0) r.grad = Mat<S>::Zero(1, 1);
    r.grad(0, 0) = S(1);
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back && n.grad.size() > 0) n.back(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<S> val;
    Mat<S> grad;
    BackFn back;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;

  friend struct TapeTestAccess;
};

// ---------------------------------------------------------------------------
// Ops. Every op validates shapes, computes the value eagerly, and registers a
// backward closure capturing node ids (plus small cached tensors where the
// value alone cannot reproduce the local derivative).
// ---------------------------------------------------------------------------

namespace ops {

template <class S>
int matmul(Tape<S>& t, int a, int b) {
  if (t.val(a).cols() != t.val(b).rows())
    throw ContractError("matmul: inner dimensions differ");
  Mat<S> out(t.val(a).rows(), t.val(b).cols());
  out.noalias() = t.val(a) * t.val(b);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, b, self](Tape<S>& tt) {
    const Mat<S> g = tt.grad(self);
    tt.accum(a, g * tt.val(b).transpose());
    tt.accum(b, tt.val(a).transpose() * g);
  });
}

// A * B^T without materializing the transpose in the graph.
template <class S>
int matmul_nt(Tape<S>& t, int a, int b) {
  if (t.val(a).cols() != t.val(b).cols())
    throw ContractError("matmul_nt: column counts differ");
  Mat<S> out(t.val(a).rows(), t.val(b).rows());
  out.noalias() = t.val(a) * t.val(b).transpose();
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, b, self](Tape<S>& tt) {
    const Mat<S> g = tt.grad(self);
    tt.accum(a, g * tt.val(b));
    tt.accum(b, g.transpose() * tt.val(a));
  });
}

template <class S>
int add(Tape<S>& t, int a, int b) {
  if (t.val(a).rows() != t.val(b).rows() || t.val(a).cols() != t.val(b).cols())
    throw ContractError("add: shape mismatch");
  Mat<S> out = t.val(a) + t.val(b);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, b, self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    tt.accum(a, g);
    tt.accum(b, g);
  });
}

template <class S>
int sub(Tape<S>& t, int a, int b) {
  if (t.val(a).rows() != t.val(b).rows() || t.val(a).cols() != t.val(b).cols())
    throw ContractError("sub: shape mismatch");
  Mat<S> out = t.val(a) - t.val(b);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, b, self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    tt.accum(a, g);
    tt.accum(b, -g);
  });
}

template <class S>
int hadamard(Tape<S>& t, int a, int b) {
  if (t.val(a).rows() != t.val(b).rows() || t.val(a).cols() != t.val(b).cols())
    throw ContractError("hadamard: shape mismatch");
  Mat<S> out = t.val(a).cwiseProduct(t.val(b));
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, b, self](Tape<S>& tt) {
    const Mat<S> g = tt.grad(self);
    tt.accum(a, g.cwiseProduct(tt.val(b)));
    tt.accum(b, g.cwiseProduct(tt.val(a)));
  });
}

// Adds a 1 x C row vector to every row.
template <class S>
int add_rowvec(Tape<S>& t, int a, int b) {
  if (t.val(b).rows() != 1 || t.val(a).cols() != t.val(b).cols())
    throw ContractError("add_rowvec: b must be 1 x cols(a)");
  Mat<S> out = t.val(a).rowwise() + t.val(b).row(0);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, b, self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    tt.accum(a, g);
    tt.accum(b, g.colwise().sum());
  });
}

// Replicates a 1 x C row n times.
template <class S>
int broadcast_row(Tape<S>& t, int a, Index n) {
  if (t.val(a).rows() != 1) throw ContractError("broadcast_row: input must have one row");
  Mat<S> out = t.val(a).replicate(n, 1);
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    tt.accum(a, tt.grad(self).colwise().sum());
  });
}

template <class S>
int scale(Tape<S>& t, int a, double c) {
  Mat<S> out = t.val(a) * static_cast<S>(c);
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, c, self](Tape<S>& tt) {
    tt.accum(a, tt.grad(self) * static_cast<S>(c));
  });
}

template <class S>
int add_scalar(Tape<S>& t, int a, double c) {
  Mat<S> out = (t.val(a).array() + static_cast<S>(c)).matrix();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    tt.accum(a, tt.grad(self));
  });
}

// max(x, 0). The subgradient at exactly zero is zero, which the hinge term
// of the reconstruction loss relies on.
template <class S>
int relu(Tape<S>& t, int a) {
  Mat<S> out = t.val(a).cwiseMax(S(0));
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    const Mat<S> mask =
        (tt.val(a).array() > S(0)).template cast<S>().matrix();
    tt.accum(a, tt.grad(self).cwiseProduct(mask));
  });
}

template <class S>
int gelu(Tape<S>& t, int a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  Mat<S> out = t.val(a).unaryExpr([](S x) {
    return static_cast<S>(0.5 * x * (1.0 + std::erf(x * kInvSqrt2)));
  });
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    const Mat<S> slope = tt.val(a).unaryExpr([](S x) {
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      return static_cast<S>(cdf + x * pdf);
    });
    tt.accum(a, tt.grad(self).cwiseProduct(slope));
  });
}

template <class S>
int tanh_op(Tape<S>& t, int a) {
  Mat<S> out = t.val(a).array().tanh().matrix();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    const auto& y = tt.val(self).array();
    tt.accum(a, (tt.grad(self).array() * (S(1) - y * y)).matrix());
  });
}

// Elementwise natural log; the caller guarantees positive inputs.
template <class S>
int log_op(Tape<S>& t, int a) {
  Mat<S> out = t.val(a).array().log().matrix();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    tt.accum(a, (tt.grad(self).array() / tt.val(a).array()).matrix());
  });
}

template <class S>
int square(Tape<S>& t, int a) {
  Mat<S> out = t.val(a).array().square().matrix();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    tt.accum(a, (tt.grad(self).array() * S(2) * tt.val(a).array()).matrix());
  });
}

template <class S>
int reciprocal(Tape<S>& t, int a) {
  Mat<S> out = t.val(a).array().inverse().matrix();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    const auto& y = tt.val(self).array();
    tt.accum(a, (-tt.grad(self).array() * y * y).matrix());
  });
}

template <class S>
int sqrt_op(Tape<S>& t, int a) {
  Mat<S> out = t.val(a).array().sqrt().matrix();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    tt.accum(a, (tt.grad(self).array() * S(0.5) / tt.val(self).array()).matrix());
  });
}

// sqrt with the backward slope clamped near zero: the forward value is the
// exact square root (so a zero input yields exactly zero), while the
// derivative uses 0.5 / max(sqrt(x), floor) so a collapsed input cannot emit
// a non-finite gradient. Away from zero this is identical to sqrt_op.
template <class S>
int sqrt_guard(Tape<S>& t, int a, double grad_floor = 1e-6) {
  if (grad_floor <= 0) throw ContractError("sqrt_guard: floor must be > 0");
  Mat<S> out = t.val(a).array().sqrt().matrix();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self, grad_floor](Tape<S>& tt) {
    const Mat<S> denom = tt.val(self).cwiseMax(static_cast<S>(grad_floor));
    tt.accum(a, (tt.grad(self).array() * S(0.5) / denom.array()).matrix());
  });
}

// Row-wise softmax with max subtraction.
template <class S>
int softmax_rows(Tape<S>& t, int a) {
  Mat<S> out = t.val(a);
  for (Index r = 0; r < out.rows(); ++r) {
    const S m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    const Mat<S>& y = tt.val(self);
    const Mat<S>& g = tt.grad(self);
    const Vec<S> dot = (g.cwiseProduct(y)).rowwise().sum();
    tt.accum(a, y.cwiseProduct(g - dot.replicate(1, y.cols())));
  });
}

// Row-wise layer normalization with learned gain and bias (both 1 x C).
template <class S>
int layer_norm(Tape<S>& t, int x, int gamma, int beta, double eps = 1e-5) {
  const Mat<S>& xv = t.val(x);
  const Index C = xv.cols();
  if (t.val(gamma).rows() != 1 || t.val(gamma).cols() != C ||
      t.val(beta).rows() != 1 || t.val(beta).cols() != C)
    throw ContractError("layer_norm: gamma/beta must be 1 x cols(x)");
  Mat<S> xhat(xv.rows(), C);
  Vec<S> inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const S mu = xv.row(r).mean();
    const S var = (xv.row(r).array() - mu).square().sum() / static_cast<S>(C);
    const S is = S(1) / std::sqrt(var + static_cast<S>(eps));
    inv_std(r) = is;
    xhat.row(r) = ((xv.row(r).array() - mu) * is).matrix();
  }
  Mat<S> out = (xhat.array().rowwise() * t.val(gamma).row(0).array()).matrix();
  out.rowwise() += t.val(beta).row(0);
  const bool ng = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true,
                [x, gamma, beta, self, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    const Index Cc = g.cols();
    tt.accum(gamma, (g.cwiseProduct(xhat)).colwise().sum());
    tt.accum(beta, g.colwise().sum());
    if (!tt.needs_grad(x)) return;
    Mat<S> dx(g.rows(), Cc);
    const auto& gam = tt.val(gamma).row(0).array();
    for (Index r = 0; r < g.rows(); ++r) {
      const auto gy = (g.row(r).array() * gam).eval();
      const S mean_gy = gy.mean();
      const S mean_gyx = (gy * xhat.row(r).array()).mean();
      dx.row(r) =
          ((gy - mean_gy - xhat.row(r).array() * mean_gyx) * inv_std(r)).matrix();
    }
    tt.accum(x, dx);
  });
}

template <class S>
int mean_all(Tape<S>& t, int a) {
  Mat<S> out(1, 1);
  out(0, 0) = t.val(a).mean();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    const S g = tt.grad(self)(0, 0) / static_cast<S>(tt.val(a).size());
    tt.accum(a, Mat<S>::Constant(tt.val(a).rows(), tt.val(a).cols(), g));
  });
}

template <class S>
int sum_all(Tape<S>& t, int a) {
  Mat<S> out(1, 1);
  out(0, 0) = t.val(a).sum();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    const S g = tt.grad(self)(0, 0);
    tt.accum(a, Mat<S>::Constant(tt.val(a).rows(), tt.val(a).cols(), g));
  });
}

// Column-wise mean: R x C -> 1 x C.
template <class S>
int mean_rows(Tape<S>& t, int a) {
  Mat<S> out = t.val(a).colwise().mean();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    const S inv = S(1) / static_cast<S>(tt.val(a).rows());
    tt.accum(a, (tt.grad(self) * inv).replicate(tt.val(a).rows(), 1));
  });
}

template <class S>
int transpose(Tape<S>& t, int a) {
  Mat<S> out = t.val(a).transpose();
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, self](Tape<S>& tt) {
    tt.accum(a, tt.grad(self).transpose());
  });
}

template <class S>
int slice_rows(Tape<S>& t, int a, Index start, Index len) {
  if (start < 0 || len < 0 || start + len > t.val(a).rows())
    throw ContractError("slice_rows: range out of bounds");
  Mat<S> out = t.val(a).middleRows(start, len);
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, start, len, self](Tape<S>& tt) {
    Mat<S> d = Mat<S>::Zero(tt.val(a).rows(), tt.val(a).cols());
    d.middleRows(start, len) = tt.grad(self);
    tt.accum(a, d);
  });
}

template <class S>
int slice_cols(Tape<S>& t, int a, Index start, Index len) {
  if (start < 0 || len < 0 || start + len > t.val(a).cols())
    throw ContractError("slice_cols: range out of bounds");
  Mat<S> out = t.val(a).middleCols(start, len);
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, start, len, self](Tape<S>& tt) {
    Mat<S> d = Mat<S>::Zero(tt.val(a).rows(), tt.val(a).cols());
    d.middleCols(start, len) = tt.grad(self);
    tt.accum(a, d);
  });
}

template <class S>
int concat_rows(Tape<S>& t, const std::vector<int>& ids) {
  if (ids.empty()) throw ContractError("concat_rows: no inputs");
  Index rows = 0;
  const Index cols = t.val(ids[0]).cols();
  bool ng = false;
  for (int id : ids) {
    if (t.val(id).cols() != cols) throw ContractError("concat_rows: column mismatch");
    rows += t.val(id).rows();
    ng = ng || t.needs_grad(id);
  }
  Mat<S> out(rows, cols);
  Index at = 0;
  for (int id : ids) {
    out.middleRows(at, t.val(id).rows()) = t.val(id);
    at += t.val(id).rows();
  }
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [ids, self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    Index at2 = 0;
    for (int id : ids) {
      tt.accum(id, g.middleRows(at2, tt.val(id).rows()));
      at2 += tt.val(id).rows();
    }
  });
}

template <class S>
int concat_cols(Tape<S>& t, const std::vector<int>& ids) {
  if (ids.empty()) throw ContractError("concat_cols: no inputs");
  Index cols = 0;
  const Index rows = t.val(ids[0]).rows();
  bool ng = false;
  for (int id : ids) {
    if (t.val(id).rows() != rows) throw ContractError("concat_cols: row mismatch");
    cols += t.val(id).cols();
    ng = ng || t.needs_grad(id);
  }
  Mat<S> out(rows, cols);
  Index at = 0;
  for (int id : ids) {
    out.middleCols(at, t.val(id).cols()) = t.val(id);
    at += t.val(id).cols();
  }
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [ids, self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    Index at2 = 0;
    for (int id : ids) {
      tt.accum(id, g.middleCols(at2, tt.val(id).cols()));
      at2 += tt.val(id).cols();
    }
  });
}

template <class S>
int gather_rows(Tape<S>& t, int a, std::vector<int> idx) {
  const Mat<S>& v = t.val(a);
  for (int i : idx)
    if (i < 0 || i >= v.rows()) throw ContractError("gather_rows: index out of range");
  Mat<S> out(static_cast<Index>(idx.size()), v.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.row(static_cast<Index>(r)) = v.row(idx[r]);
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, idx = std::move(idx), self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    Mat<S> d = Mat<S>::Zero(tt.val(a).rows(), tt.val(a).cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
      d.row(idx[r]) += g.row(static_cast<Index>(r));
    tt.accum(a, d);
  });
}

// Copies `base` and overwrites base.row(idx[i]) with rows.row(i). Used to
// assemble full token sets from mask tokens plus encoded visible tokens.
template <class S>
int scatter_rows(Tape<S>& t, int base, std::vector<int> idx, int rows) {
  const Mat<S>& bv = t.val(base);
  const Mat<S>& rv = t.val(rows);
  if (rv.rows() != static_cast<Index>(idx.size()) || rv.cols() != bv.cols())
    throw ContractError("scatter_rows: rows shape mismatch");
  std::vector<char> seen(static_cast<std::size_t>(bv.rows()), 0);
  for (int i : idx) {
    if (i < 0 || i >= bv.rows()) throw ContractError("scatter_rows: index out of range");
    if (seen[static_cast<std::size_t>(i)]) throw ContractError("scatter_rows: duplicate index");
    seen[static_cast<std::size_t>(i)] = 1;
  }
  Mat<S> out = bv;
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.row(idx[r]) = rv.row(static_cast<Index>(r));
  const bool ng = t.needs_grad(base) || t.needs_grad(rows);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [base, rows, idx = std::move(idx), self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    Mat<S> drows(static_cast<Index>(idx.size()), g.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
      drows.row(static_cast<Index>(r)) = g.row(idx[r]);
    tt.accum(rows, drows);
    if (tt.needs_grad(base)) {
      Mat<S> dbase = g;
      for (int i : idx) dbase.row(i).setZero();
      tt.accum(base, dbase);
    }
  });
}

// Sliding-window unfold along rows: (L x C) -> (Lout x k*C), tap-major
// columns, out(t, j*C + c) = x(t*s + j, c). Convolution becomes a matmul
// against a (k*C x Cout) kernel.
template <class S>
int unfold1d(Tape<S>& t, int a, Index k, Index s) {
  const Mat<S>& v = t.val(a);
  if (k <= 0 || s <= 0 || v.rows() < k)
    throw ContractError("unfold1d: need rows >= k and positive k, s");
  const Index L_out = (v.rows() - k) / s + 1;
  const Index C = v.cols();
  Mat<S> out(L_out, k * C);
  for (Index o = 0; o < L_out; ++o)
    for (Index j = 0; j < k; ++j)
      out.row(o).segment(j * C, C) = v.row(o * s + j);
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, k, s, self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    const Index Cc = tt.val(a).cols();
    Mat<S> d = Mat<S>::Zero(tt.val(a).rows(), Cc);
    for (Index o = 0; o < g.rows(); ++o)
      for (Index j = 0; j < k; ++j)
        d.row(o * s + j) += g.row(o).segment(j * Cc, Cc);
    tt.accum(a, d);
  });
}

// Patch extraction as a tape op; layout matches features.hpp patchify.
template <class S>
int patchify_op(Tape<S>& t, int a, Index ph, Index pw) {
  const Mat<S>& v = t.val(a);
  if (ph <= 0 || pw <= 0) throw ContractError("patchify_op: patch dims must be positive");
  const Index t_p = (v.rows() + ph - 1) / ph;
  const Index f_p = (v.cols() + pw - 1) / pw;
  Mat<S> out = Mat<S>::Zero(t_p * f_p, ph * pw);
  for (Index tp = 0; tp < t_p; ++tp)
    for (Index fp = 0; fp < f_p; ++fp) {
      const Index p = tp * f_p + fp;
      for (Index i = 0; i < ph; ++i) {
        const Index r = tp * ph + i;
        if (r >= v.rows()) continue;
        for (Index j = 0; j < pw; ++j) {
          const Index c = fp * pw + j;
          if (c >= v.cols()) continue;
          out(p, i * pw + j) = v(r, c);
        }
      }
    }
  const bool ng = t.needs_grad(a);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [a, ph, pw, f_p, t_p, self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    const Mat<S>& v2 = tt.val(a);
    Mat<S> d = Mat<S>::Zero(v2.rows(), v2.cols());
    for (Index tp = 0; tp < t_p; ++tp)
      for (Index fp = 0; fp < f_p; ++fp) {
        const Index p = tp * f_p + fp;
        for (Index i = 0; i < ph; ++i) {
          const Index r = tp * ph + i;
          if (r >= v2.rows()) continue;
          for (Index j = 0; j < pw; ++j) {
            const Index c = fp * pw + j;
            if (c >= v2.cols()) continue;
            d(r, c) += g(p, i * pw + j);
          }
        }
      }
    tt.accum(a, d);
  });
}

// Cross entropy of a single 1 x n logits row against an integer label,
// computed with max subtraction.
template <class S>
int cross_entropy(Tape<S>& t, int logits, int label) {
  const Mat<S>& v = t.val(logits);
  if (v.rows() != 1) throw ContractError("cross_entropy: logits must be 1 x n");
  if (label < 0 || label >= v.cols())
    throw ContractError("cross_entropy: label out of range");
  const S m = v.row(0).maxCoeff();
  const S lse = m + std::log((v.row(0).array() - m).exp().sum());
  Mat<S> out(1, 1);
  out(0, 0) = lse - v(0, label);
  const bool ng = t.needs_grad(logits);
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [logits, label, self](Tape<S>& tt) {
    const Mat<S>& vv = tt.val(logits);
    const S mm = vv.row(0).maxCoeff();
    Mat<S> p = (vv.row(0).array() - mm).exp().matrix();
    p /= p.sum();
    p(0, label) -= S(1);
    tt.accum(logits, tt.grad(self)(0, 0) * p);
  });
}

// c_0 * a_0 + c_1 * a_1 + ... for same-shape nodes; batch means and loss
// sums.
template <class S>
int add_weighted(Tape<S>& t, const std::vector<int>& ids,
                 const std::vector<double>& coeffs) {
  if (ids.empty() || ids.size() != coeffs.size())
    throw ContractError("add_weighted: ids/coeffs mismatch");
  Mat<S> out = Mat<S>::Zero(t.val(ids[0]).rows(), t.val(ids[0]).cols());
  bool ng = false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (t.val(ids[i]).rows() != out.rows() || t.val(ids[i]).cols() != out.cols())
      throw ContractError("add_weighted: shape mismatch");
    out += static_cast<S>(coeffs[i]) * t.val(ids[i]);
    ng = ng || t.needs_grad(ids[i]);
  }
  if (!ng) return t.push(std::move(out), false, nullptr);
  const int self = t.next_id();
  return t.push(std::move(out), true, [ids, coeffs, self](Tape<S>& tt) {
    const Mat<S>& g = tt.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i)
      tt.accum(ids[i], static_cast<S>(coeffs[i]) * g);
  });
}

// Mean squared error between two same-shape nodes.
template <class S>
int mse(Tape<S>& t, int a, int b) {
  return mean_all(t, square(t, sub(t, a, b)));
}

}  // namespace ops

inline Index argmax_row(const Eigen::Ref<const Matf>& row) {
  Index best = 0;
  row.row(0).maxCoeff(&best);
  return best;
}

}  // namespace sastnet

#endif  // SASTNET_GRAPH_HPP_
