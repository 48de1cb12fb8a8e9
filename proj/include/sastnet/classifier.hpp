// sastnet/classifier.hpp
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
//
// Utterance-level classification head and the joint-loss machinery:
//
//  * attentive statistics pooling — a learned attention score per frame turns
//    the frame sequence into a weighted mean + weighted standard deviation,
//    concatenated and pushed through a two-layer feed-forward head;
//  * cls_loss — softmax cross entropy, stabilized by max subtraction;
//  * adaptive loss weighting — the classification and reconstruction losses
//    are combined as L_cls/(2w_cls^2) + L_recon/(2w_recon^2)
//    + ln(1+w_cls^2) + ln(1+w_recon^2), with both weights learned. Storing
//    the raw weight and squaring it wherever it is used keeps the effective
//    weight strictly positive without constraints.
//
// The head is deliberately pluggable: anything that maps an L x D frame
// matrix to a 1 x n_classes logits row can replace ClassifierM.

#ifndef SASTNET_CLASSIFIER_HPP_
#define SASTNET_CLASSIFIER_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sastnet/nn.hpp"

namespace sastnet {

struct ClassifierConfig {
  Index d_in = 64;
  Index attn_hidden = 64;
  Index mlp_hidden = 64;
  Index n_classes = 4;

  void validate() const {
    if (d_in <= 0 || attn_hidden <= 0 || mlp_hidden <= 0)
      throw ContractError("ClassifierConfig: widths must be positive");
    if (n_classes < 2) throw ContractError("ClassifierConfig: need >= 2 classes");
  }
};

class ClassifierM {
 public:
  ClassifierM() = default;

  ClassifierM(ParamStore<float>& ps, const std::string& prefix,
              ClassifierConfig cfg)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    attn0_ = LinearM<float>(ps, prefix + ".attn0", cfg_.d_in, cfg_.attn_hidden);
    attn1_ = LinearM<float>(ps, prefix + ".attn1", cfg_.attn_hidden, 1);
    fc0_ = LinearM<float>(ps, prefix + ".fc0", 2 * cfg_.d_in, cfg_.mlp_hidden);
    fc1_ = LinearM<float>(ps, prefix + ".fc1", cfg_.mlp_hidden, cfg_.n_classes);
  }

  const ClassifierConfig& config() const { return cfg_; }

  // frames: L x d_in -> logits 1 x n_classes. When `weights_out` is given the
  // attention weights (1 x L) used for pooling are copied out.
  int operator()(Tape<float>& t, Binding<float>& bind, ParamStore<float>& ps,
                 int frames, Matf* weights_out = nullptr) const {
    const auto& fv = t.val(frames);
    if (fv.cols() != cfg_.d_in)
      throw ContractError("ClassifierM: frame width " + std::to_string(fv.cols()) +
                          " != configured " + std::to_string(cfg_.d_in));
    if (fv.rows() < 1) throw ContractError("ClassifierM: empty frame sequence");
    if (!fv.allFinite()) throw ContractError("ClassifierM: non-finite frames");

    const int scores = attn1_(t, bind, ps, ops::tanh_op(t, attn0_(t, bind, ps, frames)));
    const int w = ops::softmax_rows(t, ops::transpose(t, scores));  // 1 x L
    if (weights_out) *weights_out = t.val(w);

    const int mean = ops::matmul(t, w, frames);  // 1 x d
    const int diff = ops::sub(t, frames, ops::broadcast_row(t, mean, fv.rows()));
    const int var = ops::matmul(t, w, ops::hadamard(t, diff, diff));  // 1 x d
    const int stddev = ops::sqrt_guard(t, var);
    const int stats = ops::concat_cols(t, {mean, stddev});  // 1 x 2d

    return fc1_(t, bind, ps, ops::gelu(t, fc0_(t, bind, ps, stats)));
  }

 private:
  ClassifierConfig cfg_;
  LinearM<float> attn0_, attn1_, fc0_, fc1_;
};

// Softmax cross entropy against an integer label (max-subtraction inside).
template <class S>
int cls_loss(Tape<S>& t, int logits, int label) {
  return ops::cross_entropy(t, logits, label);
}

// The combine formula on raw-weight nodes (each 1 x 1). Scalar-generic so the
// worked values can be checked on a double tape; the gradient reaches both
// losses and both raw weights.
template <class S>
int awl_formula(Tape<S>& t, int l_cls, int l_recon, int u_cls, int u_recon) {
  for (int node : {l_cls, l_recon, u_cls, u_recon}) {
    const auto& v = t.val(node);
    if (v.rows() != 1 || v.cols() != 1)
      throw ContractError("awl_formula: all inputs must be 1 x 1");
    if (!v.allFinite())
      throw ContractError("awl_formula: non-finite input");
  }
  const int sq_cls = ops::square(t, u_cls);
  const int sq_rec = ops::square(t, u_recon);
  const int term_cls =
      ops::hadamard(t, l_cls, ops::reciprocal(t, ops::scale(t, sq_cls, 2.0)));
  const int term_rec =
      ops::hadamard(t, l_recon, ops::reciprocal(t, ops::scale(t, sq_rec, 2.0)));
  const int reg_cls = ops::log_op(t, ops::add_scalar(t, sq_cls, 1.0));
  const int reg_rec = ops::log_op(t, ops::add_scalar(t, sq_rec, 1.0));
  return ops::add(t, ops::add(t, term_cls, term_rec),
                  ops::add(t, reg_cls, reg_rec));
}

// Owns the two learnable raw weights. Effective weights are the squares of
// the stored parameters, so they stay strictly positive under any update.
class AwlM {
 public:
  AwlM() = default;

  AwlM(ParamStore<float>& ps, const std::string& prefix) {
    u_cls_ = ps.create(prefix + ".w_cls", 1, 1, Init::kOne, /*decay=*/false);
    u_rec_ = ps.create(prefix + ".w_recon", 1, 1, Init::kOne, /*decay=*/false);
  }

  int combine(Tape<float>& t, Binding<float>& bind, ParamStore<float>& ps,
              int l_cls, int l_recon) const {
    return awl_formula(t, l_cls, l_recon, bind.use(t, ps, u_cls_),
                       bind.use(t, ps, u_rec_));
  }

  // Effective (always-positive) weights for logging.
  std::pair<double, double> weights(const ParamStore<float>& ps) const {
    const double uc = ps.entry(u_cls_).value(0, 0);
    const double ur = ps.entry(u_rec_).value(0, 0);
    return {uc * uc, ur * ur};
  }

 private:
  int u_cls_ = -1, u_rec_ = -1;
};

}  // namespace sastnet

#endif  // SASTNET_CLASSIFIER_HPP_
