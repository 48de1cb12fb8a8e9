// sastnet/acoustic.hpp
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
// Coarse-to-fine acoustic branch. A strided-convolution front end plus a
// small transformer produces frame embeddings (e_coarse) from the raw
// waveform. A masked autoencoder patchifies those embeddings, encodes the
// visible patches, and reconstructs the full grid once per source class with
// class-specific decoders; the decoder that reconstructs an input best is
// the one whose class the input belongs to, which the margin loss enforces.
// A multi-head-attention readout with the latent as queries and the
// concatenated reconstructions as keys/values emits the acoustic feature.

#ifndef SASTNET_ACOUSTIC_HPP_
#define SASTNET_ACOUSTIC_HPP_

#include <string>
#include <utility>
#include <vector>

#include "sastnet/features.hpp"
#include "sastnet/nn.hpp"

namespace sastnet {

// ---------------------------------------------------------------------------
// Coarse encoder: strided 1-D convolutions over the raw waveform followed by
// a short transformer stack. Parameters are trainable and may be seeded from
// a checkpoint of a previously fine-tuned run.
// ---------------------------------------------------------------------------

struct ConvSpec {
  Index kernel = 0;
  Index stride = 0;
  Index out_channels = 0;
};

struct CoarseConfig {
  Index in_samples = 32800;
  std::vector<ConvSpec> convs{{16, 8, 32}, {8, 8, 64}, {4, 4, 64}};
  Index d_model = 64;
  int n_layers = 2;
  Index n_heads = 4;
  Index d_ff = 256;

  Index out_frames() const {
    Index len = in_samples;
    for (const auto& c : convs) {
      if (c.kernel <= 0 || c.stride <= 0 || len < c.kernel)
        throw ContractError("CoarseConfig: conv stack does not fit the input");
      len = (len - c.kernel) / c.stride + 1;
    }
    return len;
  }

  void validate() const {
    if (in_samples <= 0) throw ContractError("CoarseConfig: in_samples must be positive");
    if (convs.empty()) throw ContractError("CoarseConfig: need at least one conv");
    for (const auto& c : convs)
      if (c.out_channels <= 0)
        throw ContractError("CoarseConfig: conv channels must be positive");
    if (convs.back().out_channels != d_model)
      throw ContractError("CoarseConfig: last conv width must equal d_model");
    if (n_layers < 0) throw ContractError("CoarseConfig: n_layers must be >= 0");
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
      throw ContractError("CoarseConfig: d_model must be divisible by n_heads");
    (void)out_frames();  // throws when the stack does not fit
  }
};

class CoarseEncoder {
 public:
  CoarseEncoder() = default;

  CoarseEncoder(ParamStore<float>& ps, const std::string& prefix,
                CoarseConfig cfg)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    Index in_ch = 1;
    for (std::size_t i = 0; i < cfg_.convs.size(); ++i) {
      const ConvSpec& c = cfg_.convs[i];
      convs_.emplace_back(ps, prefix + ".conv" + std::to_string(i),
                          c.kernel * in_ch, c.out_channels);
      in_ch = c.out_channels;
    }
    for (int l = 0; l < cfg_.n_layers; ++l)
      layers_.emplace_back(ps, prefix + ".layer" + std::to_string(l),
                           cfg_.d_model, cfg_.n_heads, cfg_.d_ff);
    ln_f_ = LayerNormM<float>(ps, prefix + ".ln_f", cfg_.d_model);
    pos_ = sinusoidal_positions<float>(cfg_.out_frames(), cfg_.d_model);
  }

  const CoarseConfig& config() const { return cfg_; }

  // Convolutional front end only: (in_samples x 1) -> (out_frames x d_model).
  // On an all-zero input every output row equals the bias pathway, i.e. the
  // stack applied to zeros, so rows are constant across time.
  int conv_forward(Tape<float>& t, Binding<float>& bind, ParamStore<float>& ps,
                   int x) const {
    if (t.val(x).rows() != cfg_.in_samples || t.val(x).cols() != 1)
      throw ContractError("CoarseEncoder: input must be in_samples x 1, got " +
                          std::to_string(t.val(x).rows()) + " x " +
                          std::to_string(t.val(x).cols()));
    int h = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      h = ops::unfold1d(t, h, cfg_.convs[i].kernel, cfg_.convs[i].stride);
      h = convs_[i](t, bind, ps, h);
      h = ops::gelu(t, h);
    }
    return h;
  }

  // Full encoder: conv front end, positions, transformer, final norm.
  // Output node holds (out_frames x d_model).
  int forward(Tape<float>& t, Binding<float>& bind, ParamStore<float>& ps,
              int x) const {
    int h = conv_forward(t, bind, ps, x);
    h = ops::add(t, h, t.constant(pos_));
    for (const auto& layer : layers_) h = layer(t, bind, ps, h);
    return ln_f_(t, bind, ps, h);
  }

 private:
  CoarseConfig cfg_;
  std::vector<LinearM<float>> convs_;
  std::vector<EncoderLayerM<float>> layers_;
  LayerNormM<float> ln_f_;
  Matf pos_;
};

// ---------------------------------------------------------------------------
// Masked autoencoder over the coarse embedding grid, with one decoder per
// source class. Masking happens only when a plan is supplied (training);
// without a plan every patch is visible (inference).
// ---------------------------------------------------------------------------

struct MaeConfig {
  Index frames = 128;    // e_coarse rows
  Index channels = 64;   // e_coarse cols
  Index patch_rows = 8;
  Index patch_cols = 8;
  double mask_ratio = 0.4;
  Index d_model = 64;
  int enc_layers = 2;
  int dec_layers = 2;
  Index n_heads = 4;
  Index d_ff = 256;
  int n_decoders = 3;

  Index grid_rows() const { return frames / patch_rows; }
  Index grid_cols() const { return channels / patch_cols; }
  Index n_patches() const { return grid_rows() * grid_cols(); }
  Index patch_dim() const { return patch_rows * patch_cols; }

  void validate() const {
    if (frames <= 0 || channels <= 0)
      throw ContractError("MaeConfig: empty embedding grid");
    if (patch_rows <= 0 || patch_cols <= 0 || frames % patch_rows != 0 ||
        channels % patch_cols != 0)
      throw ContractError("MaeConfig: patches must tile the grid exactly");
    if (mask_ratio < 0.0 || mask_ratio >= 1.0)
      throw ContractError("MaeConfig: mask_ratio must be in [0, 1)");
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
      throw ContractError("MaeConfig: d_model must be divisible by n_heads");
    if (enc_layers < 0 || dec_layers < 0)
      throw ContractError("MaeConfig: layer counts must be >= 0");
    if (n_decoders < 1)
      throw ContractError("MaeConfig: need at least one decoder");
  }
};

struct MaeOut {
  int h = -1;                // latent tokens: visible count (train) or all (infer)
  std::vector<int> recons;   // per decoder, full n_patches x patch_dim
};

class MaeModule {
 public:
  MaeModule() = default;

  MaeModule(ParamStore<float>& ps, const std::string& prefix, MaeConfig cfg)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    embed_ = LinearM<float>(ps, prefix + ".embed", cfg_.patch_dim(), cfg_.d_model);
    for (int l = 0; l < cfg_.enc_layers; ++l)
      enc_layers_.emplace_back(ps, prefix + ".enc" + std::to_string(l),
                               cfg_.d_model, cfg_.n_heads, cfg_.d_ff);
    enc_ln_ = LayerNormM<float>(ps, prefix + ".enc_ln", cfg_.d_model);
    // One learned mask-token embedding shared by all decoders: the token
    // marks "missing" and must not leak class information.
    mask_token_ = ps.create(prefix + ".mask_token", 1, cfg_.d_model,
                            Init::kNormal, false);
    decoders_.resize(static_cast<std::size_t>(cfg_.n_decoders));
    for (int d = 0; d < cfg_.n_decoders; ++d) {
      auto& dec = decoders_[static_cast<std::size_t>(d)];
      const std::string base = prefix + ".dec" + std::to_string(d);
      for (int l = 0; l < cfg_.dec_layers; ++l)
        dec.layers.emplace_back(ps, base + ".layer" + std::to_string(l),
                                cfg_.d_model, cfg_.n_heads, cfg_.d_ff);
      dec.ln = LayerNormM<float>(ps, base + ".ln", cfg_.d_model);
      dec.out = LinearM<float>(ps, base + ".out", cfg_.d_model, cfg_.patch_dim());
    }
    pos_ = sinusoidal_positions_2d<float>(cfg_.grid_rows(), cfg_.grid_cols(),
                                          cfg_.d_model);
  }

  const MaeConfig& config() const { return cfg_; }

  // Forward pass. With a plan, only visible patches reach the encoder and
  // each decoder sees the latent scattered back among mask tokens; without a
  // plan every patch is visible and no mask token is consulted.
  MaeOut forward(Tape<float>& t, Binding<float>& bind, ParamStore<float>& ps,
                 int e_coarse, const MaskPlan* plan) const {
    const Matf& e = t.val(e_coarse);
    if (e.rows() != cfg_.frames || e.cols() != cfg_.channels)
      throw ContractError("MaeModule: embedding shape mismatch, got " +
                          std::to_string(e.rows()) + " x " +
                          std::to_string(e.cols()));
    if (plan && (plan->t_p != cfg_.grid_rows() || plan->f_p != cfg_.grid_cols()))
      throw ContractError("MaeModule: mask plan grid mismatch");

    const int patches = ops::patchify_op(t, e_coarse, cfg_.patch_rows,
                                         cfg_.patch_cols);
    const int pos = t.constant(pos_);
    const int tokens = ops::add(t, embed_(t, bind, ps, patches), pos);

    int x = plan ? ops::gather_rows(t, tokens, plan->visible) : tokens;
    for (const auto& layer : enc_layers_) x = layer(t, bind, ps, x);
    const int h = enc_ln_(t, bind, ps, x);

    MaeOut out;
    out.h = h;
    out.recons.reserve(decoders_.size());
    const Index n_patches = cfg_.n_patches();
    for (const auto& dec : decoders_) {
      int dec_in;
      if (plan) {
        const int mask_rows = ops::broadcast_row(
            t, bind.use(t, ps, mask_token_), n_patches);
        const int assembled = ops::scatter_rows(t, mask_rows, plan->visible, h);
        dec_in = ops::add(t, assembled, pos);
      } else {
        dec_in = ops::add(t, h, pos);
      }
      int y = dec_in;
      for (const auto& layer : dec.layers) y = layer(t, bind, ps, y);
      y = dec.ln(t, bind, ps, y);
      out.recons.push_back(dec.out(t, bind, ps, y));
    }
    return out;
  }

 private:
  struct Decoder {
    std::vector<EncoderLayerM<float>> layers;
    LayerNormM<float> ln;
    LinearM<float> out;
  };

  MaeConfig cfg_;
  LinearM<float> embed_;
  std::vector<EncoderLayerM<float>> enc_layers_;
  LayerNormM<float> enc_ln_;
  int mask_token_ = -1;
  std::vector<Decoder> decoders_;
  Matf pos_;
};

// ---------------------------------------------------------------------------
// Reconstruction losses. Targets are the patchified coarse embeddings as
// values (no gradient flows into the target side), restricted to the masked
// patches: reconstruction is only scored where the decoder had to guess.
// ---------------------------------------------------------------------------

namespace detail {

// Masked-patch targets as a constant node: P_masked x patch_dim. The target
// side carries no gradient; reconstruction chases values, not vice versa.
template <class S>
int masked_targets(Tape<S>& t, int e_coarse, const MaskPlan& plan) {
  const Mat<S>& e = t.val(e_coarse);
  if (plan.t_p <= 0 || plan.f_p <= 0 || e.rows() % plan.t_p != 0 ||
      e.cols() % plan.f_p != 0)
    throw ContractError("masked_targets: plan does not tile the embedding");
  const Index ph = e.rows() / plan.t_p;
  const Index pw = e.cols() / plan.f_p;
  const PatchGrid<S> grid = patchify(e, ph, pw);
  Mat<S> out(static_cast<Index>(plan.masked.size()), grid.patches.cols());
  for (std::size_t i = 0; i < plan.masked.size(); ++i)
    out.row(static_cast<Index>(i)) = grid.patches.row(plan.masked[i]);
  return t.constant(out);
}

template <class S>
void check_recon_shape(const Tape<S>& t, int recon, const MaskPlan& plan,
                       Index patch_dim) {
  if (t.val(recon).rows() != plan.t_p * plan.f_p ||
      t.val(recon).cols() != patch_dim)
    throw ContractError("reconstruction shape does not match the patch grid");
}

}  // namespace detail

// Mean squared error between a reconstruction and the coarse embedding over
// masked patches only. Used directly by the single-decoder model variant.
template <class S>
int masked_recon_mse(Tape<S>& t, int e_coarse, int recon,
                     const MaskPlan& plan) {
  if (plan.masked.empty())
    throw ContractError("masked_recon_mse: plan masks no patches");
  const int targets = detail::masked_targets(t, e_coarse, plan);
  detail::check_recon_shape(t, recon, plan, t.val(targets).cols());
  return ops::mse(t, ops::gather_rows(t, recon, plan.masked), targets);
}

// The margin formula over per-decoder loss nodes: the labeled decoder must
// beat the average of the others by the margin, otherwise the shortfall is
// added on top of its own error:
//   total = L_true + max(0, margin + L_true - L_other).
// The hinge takes subgradient 0 at its kink.
template <class S>
int margin_from_losses(Tape<S>& t, const std::vector<int>& losses, int label,
                       double margin, int* loss_other_out = nullptr) {
  const int n = static_cast<int>(losses.size());
  if (n < 2)
    throw ContractError("margin_from_losses: needs >= 2 decoders, got " +
                        std::to_string(n));
  if (label < 0 || label >= n)
    throw ContractError("margin_from_losses: label out of range");
  int other_sum = -1;
  for (int i = 0; i < n; ++i) {
    if (i == label) continue;
    other_sum = other_sum < 0 ? losses[static_cast<std::size_t>(i)]
                              : ops::add(t, other_sum,
                                         losses[static_cast<std::size_t>(i)]);
  }
  const int loss_true = losses[static_cast<std::size_t>(label)];
  const int loss_other = ops::scale(t, other_sum, 1.0 / (n - 1));
  if (loss_other_out) *loss_other_out = loss_other;
  const int hinge = ops::relu(
      t, ops::add_scalar(t, ops::sub(t, loss_true, loss_other), margin));
  return ops::add(t, loss_true, hinge);
}

struct ReconLossParts {
  int total = -1;
  int loss_true = -1;             // masked MSE of the labeled class's decoder
  int loss_other = -1;            // average masked MSE of the other decoders
  std::vector<int> per_decoder;   // masked MSE per decoder
};

// Margin reconstruction loss over masked patches.
template <class S>
int recon_margin_loss(Tape<S>& t, int e_coarse, const std::vector<int>& recons,
                      int label, const MaskPlan& plan, double margin,
                      ReconLossParts* parts = nullptr) {
  const int n = static_cast<int>(recons.size());
  if (n < 2)
    throw ContractError("recon_margin_loss: needs >= 2 decoders, got " +
                        std::to_string(n));
  if (label < 0 || label >= n)
    throw ContractError("recon_margin_loss: label out of range");
  if (plan.masked.empty())
    throw ContractError("recon_margin_loss: plan masks no patches");

  const int targets = detail::masked_targets(t, e_coarse, plan);
  std::vector<int> losses;
  losses.reserve(recons.size());
  for (int r : recons) {
    detail::check_recon_shape(t, r, plan, t.val(targets).cols());
    losses.push_back(ops::mse(t, ops::gather_rows(t, r, plan.masked), targets));
  }

  int loss_other = -1;
  const int total = margin_from_losses(t, losses, label, margin, &loss_other);
  if (parts) {
    parts->total = total;
    parts->loss_true = losses[static_cast<std::size_t>(label)];
    parts->loss_other = loss_other;
    parts->per_decoder = std::move(losses);
  }
  return total;
}

// Value-space per-decoder masked errors for specialization diagnostics:
// which decoder reconstructs this input best?
template <class S>
std::vector<double> decoder_masked_errors(const Mat<S>& e_coarse,
                                          const std::vector<Mat<S>>& recons,
                                          const MaskPlan& plan) {
  if (recons.empty())
    throw ContractError("decoder_masked_errors: no reconstructions");
  if (plan.masked.empty())
    throw ContractError("decoder_masked_errors: plan masks no patches");
  if (plan.t_p <= 0 || plan.f_p <= 0 || e_coarse.rows() % plan.t_p != 0 ||
      e_coarse.cols() % plan.f_p != 0)
    throw ContractError("decoder_masked_errors: plan does not tile the embedding");
  const Index ph = e_coarse.rows() / plan.t_p;
  const Index pw = e_coarse.cols() / plan.f_p;
  const PatchGrid<S> grid = patchify(e_coarse, ph, pw);
  std::vector<double> out;
  out.reserve(recons.size());
  for (const Mat<S>& r : recons) {
    if (r.rows() != plan.t_p * plan.f_p || r.cols() != grid.patches.cols())
      throw ContractError("decoder_masked_errors: reconstruction shape mismatch");
    double sum = 0.0;
    for (int p : plan.masked) {
      const auto diff =
          (grid.patches.row(p) - r.row(p)).template cast<double>();
      sum += diff.squaredNorm();
    }
    out.push_back(sum / (static_cast<double>(plan.masked.size()) *
                         static_cast<double>(grid.patches.cols())));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Readout: the latent queries the concatenated reconstructions. One output
// frame per latent token; at inference the latent covers every patch.
// ---------------------------------------------------------------------------

class ReadoutM {
 public:
  ReadoutM() = default;

  ReadoutM(ParamStore<float>& ps, const std::string& prefix, Index latent_dim,
           Index recon_dim, Index d_out, Index n_heads)
      : mha_(ps, prefix, latent_dim, recon_dim, d_out, n_heads) {}

  int operator()(Tape<float>& t, Binding<float>& bind, ParamStore<float>& ps,
                 int h, const std::vector<int>& recons,
                 std::vector<Matf>* capture = nullptr) const {
    if (recons.empty())
      throw ContractError("attend_reconstructions: no reconstructions");
    const int concat =
        recons.size() == 1 ? recons[0] : ops::concat_rows(t, recons);
    return mha_(t, bind, ps, h, concat, nullptr, capture);
  }

 private:
  MhaM<float> mha_;
};

}  // namespace sastnet

#endif  // SASTNET_ACOUSTIC_HPP_
