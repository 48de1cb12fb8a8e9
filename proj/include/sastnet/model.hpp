// sastnet/model.hpp
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
// The assembled source tracer. One class wires the coarse acoustic encoder,
// the class-conditional masked autoencoder with its attention readout, the
// optional semantic/acoustic fusion stack, and the attentive-pooling
// classifier, according to the model variant:
//
//   baseline    waveform -> coarse encoder -> classifier
//   s_mae       + masked autoencoder (single decoder) -> readout -> classifier
//   m_mae       + one decoder per class with the margin reconstruction loss
//   sem_mae     + frozen semantic stream fused with the readout (coarse frozen)
//   coarse_mae  fusion's second stream is the live coarse embedding itself
//   sastnet     frozen semantic + trainable coarse + class decoders + fusion
//
// Parameters live in per-component stores so checkpoints can move a component
// (e.g. a tuned coarse encoder) between variants, and so training can freeze
// a component by simply not stepping its store.

#ifndef SASTNET_MODEL_HPP_
#define SASTNET_MODEL_HPP_

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sastnet/acoustic.hpp"
#include "sastnet/checkpoint.hpp"
#include "sastnet/classifier.hpp"
#include "sastnet/config.hpp"
#include "sastnet/fusion.hpp"
#include "sastnet/semantic.hpp"

namespace sastnet {

// ---------------------------------------------------------------------------
// Fixed-length waveform blocks for the coarse branch. The block is copied
// from `offset` and zero-padded past the end of the recording; training draws
// the offset at random, inference centers it so reruns are deterministic.
// ---------------------------------------------------------------------------

inline Index max_block_offset(const Waveform& w, Index out_samples) {
  return std::max<Index>(0, w.size() - out_samples);
}

inline Index centered_block_offset(const Waveform& w, Index out_samples) {
  return max_block_offset(w, out_samples) / 2;
}

inline Matf wave_block(const Waveform& w, Index out_samples, Index offset) {
  if (out_samples <= 0) throw ContractError("wave_block: empty block");
  if (offset < 0) throw ContractError("wave_block: negative offset");
  Matf block = Matf::Zero(out_samples, 1);
  const Index have = std::max<Index>(0, std::min(w.size() - offset, out_samples));
  for (Index i = 0; i < have; ++i) block(i, 0) = w.samples(offset + i);
  return block;
}

// ---------------------------------------------------------------------------
// Forward-pass handles. Node ids of -1 mark parts the variant does not build
// or that were not requested (e.g. losses without a label).
// ---------------------------------------------------------------------------

struct ModelForward {
  int e_coarse = -1;        // frames x d_model coarse embedding
  int h = -1;               // autoencoder latent (visible tokens when masked)
  std::vector<int> recons;  // per decoder, n_patches x patch_dim
  int o_acoustic = -1;      // readout frames
  int o_fusion = -1;        // fused frames (fusion variants only)
  int logits = -1;          // 1 x n_classes
  int loss_cls = -1;
  int loss_recon = -1;      // only when a mask plan was supplied
  int loss_total = -1;      // only when a label was supplied
  ReconLossParts recon_parts;  // filled by the margin loss variants
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng root(init_seed);
    coarse_ps_ = ParamStore<float>(root.derive("coarse-init"));
    mae_ps_ = ParamStore<float>(root.derive("mae-init"));
    fusion_ps_ = ParamStore<float>(root.derive("fusion-init"));
    cls_ps_ = ParamStore<float>(root.derive("cls-init"));
    awl_ps_ = ParamStore<float>(root.derive("awl-init"));

    coarse_ = CoarseEncoder(coarse_ps_, "coarse", cfg_.coarse);
    if (cfg_.uses_mae()) {
      mae_ = MaeModule(mae_ps_, "mae", cfg_.mae);
      readout_ = ReadoutM(mae_ps_, "readout", cfg_.mae.d_model,
                          cfg_.mae.patch_dim(), cfg_.d_readout,
                          cfg_.readout_heads);
    }
    if (cfg_.uses_fusion()) fusion_ = FusionModule(fusion_ps_, "fusion", cfg_.fusion);
    cls_ = ClassifierM(cls_ps_, "cls", cfg_.cls);
    if (cfg_.uses_awl()) awl_ = AwlM(awl_ps_, "awl");
  }

  const ModelConfig& config() const { return cfg_; }

  // One utterance through the variant's graph. `block` is the fixed-length
  // waveform block (in_samples x 1); `o_sem` is the frozen semantic feature
  // (l_sem x d_sem), required exactly when the variant fuses a semantic
  // stream; `plan` masks the autoencoder (training only — without it every
  // patch is visible and no reconstruction loss exists); `label` >= 0 adds
  // the losses. `cap` records fusion attention, `readout_cap` the readout's.
  ModelForward forward(Tape<float>& t, Binding<float>& bind, const Matf& block,
                       const Matf* o_sem, const MaskPlan* plan, int label = -1,
                       FusionCapture* cap = nullptr,
                       std::vector<Matf>* readout_cap = nullptr) {
    if (plan && !cfg_.uses_mae())
      throw ContractError("model: variant '" +
                          std::string(to_string(cfg_.variant)) +
                          "' has no masked autoencoder to plan for");
    if (cfg_.uses_semantic()) {
      if (!o_sem)
        throw ContractError("model: variant '" +
                            std::string(to_string(cfg_.variant)) +
                            "' needs the semantic stream");
      if (o_sem->rows() != cfg_.l_sem || o_sem->cols() != cfg_.d_sem)
        throw ContractError(
            "model: semantic feature must be " + std::to_string(cfg_.l_sem) +
            " x " + std::to_string(cfg_.d_sem) + ", got " +
            std::to_string(o_sem->rows()) + " x " +
            std::to_string(o_sem->cols()));
    }

    ModelForward out;
    const int x = t.constant(block);
    out.e_coarse = coarse_.forward(t, bind, coarse_ps_, x);

    int feat = out.e_coarse;
    if (cfg_.uses_mae()) {
      const MaeOut mo = mae_.forward(t, bind, mae_ps_, out.e_coarse, plan);
      out.h = mo.h;
      out.recons = mo.recons;
      out.o_acoustic =
          readout_(t, bind, mae_ps_, mo.h, mo.recons, readout_cap);
      feat = out.o_acoustic;
      if (cfg_.uses_fusion()) {
        const int sem_node = cfg_.uses_semantic() ? t.constant(*o_sem)
                                                  : out.e_coarse;
        const FusionOut fo =
            fusion_.forward(t, bind, fusion_ps_, sem_node, out.o_acoustic, cap);
        out.o_fusion = fo.o_fusion;
        feat = fo.o_fusion;
      }
    }

    out.logits = cls_(t, bind, cls_ps_, feat);

    if (label >= 0) {
      out.loss_cls = cls_loss(t, out.logits, label);
      if (plan) {
        if (cfg_.uses_margin())
          out.loss_recon =
              recon_margin_loss(t, out.e_coarse, out.recons, label, *plan,
                                cfg_.margin, &out.recon_parts);
        else
          out.loss_recon =
              masked_recon_mse(t, out.e_coarse, out.recons[0], *plan);
        out.loss_total = awl_.combine(t, bind, awl_ps_, out.loss_cls,
                                      out.loss_recon);
      } else {
        out.loss_total = out.loss_cls;
      }
    }
    return out;
  }

  // Effective loss weights (the stored parameters squared); a variant with no
  // reconstruction loss reports the plain cross-entropy weighting.
  std::pair<float, float> loss_weights() const {
    if (!cfg_.uses_awl()) return {1.0f, 0.0f};
    return awl_.weights(awl_ps_);
  }

  ParamStore<float>& coarse_ps() { return coarse_ps_; }
  ParamStore<float>& mae_ps() { return mae_ps_; }
  ParamStore<float>& fusion_ps() { return fusion_ps_; }
  ParamStore<float>& cls_ps() { return cls_ps_; }
  ParamStore<float>& awl_ps() { return awl_ps_; }
  const ParamStore<float>& coarse_ps() const { return coarse_ps_; }
  const ParamStore<float>& mae_ps() const { return mae_ps_; }
  const ParamStore<float>& fusion_ps() const { return fusion_ps_; }
  const ParamStore<float>& cls_ps() const { return cls_ps_; }
  const ParamStore<float>& awl_ps() const { return awl_ps_; }

  // Every store the variant populated, in checkpoint order.
  std::vector<std::pair<std::string, ParamStore<float>*>> stores() {
    std::vector<std::pair<std::string, ParamStore<float>*>> out;
    for (auto& [name, ps] : named_stores())
      if (!ps->entries.empty()) out.emplace_back(name, ps);
    return out;
  }

  // The stores gradient steps may touch: everything except a frozen coarse
  // encoder (the semantic-plus-autoencoder variant keeps it fixed).
  std::vector<ParamStore<float>*> trainable_stores() {
    std::vector<ParamStore<float>*> out;
    for (auto& [name, ps] : stores())
      if (cfg_.coarse_trainable() || name != "coarse") out.push_back(ps);
    return out;
  }

  std::uint64_t digest() const {
    Digest d;
    d.feed_u64(coarse_ps_.digest());
    d.feed_u64(mae_ps_.digest());
    d.feed_u64(fusion_ps_.digest());
    d.feed_u64(cls_ps_.digest());
    d.feed_u64(awl_ps_.digest());
    return d.value();
  }

 private:
  std::vector<std::pair<std::string, ParamStore<float>*>> named_stores() {
    return {{"coarse", &coarse_ps_},
            {"mae", &mae_ps_},
            {"fusion", &fusion_ps_},
            {"cls", &cls_ps_},
            {"awl", &awl_ps_}};
  }

  ModelConfig cfg_;
  ParamStore<float> coarse_ps_, mae_ps_, fusion_ps_, cls_ps_, awl_ps_;
  CoarseEncoder coarse_;
  MaeModule mae_;
  ReadoutM readout_;
  FusionModule fusion_;
  ClassifierM cls_;
  AwlM awl_;
};

// ---------------------------------------------------------------------------
// Checkpointing. The archive is self-describing: its meta block carries the
// finalized model configuration, so loading needs no side channel.
// ---------------------------------------------------------------------------

inline void save_model(Model& model, const std::string& path,
                       std::map<std::string, std::string> meta = {},
                       bool with_opt_state = false) {
  meta["kind"] = "sastnet-model";
  meta["model_config"] = model_config_to_json(model.config());
  std::vector<std::pair<std::string, const ParamStore<float>*>> sections;
  for (auto& [name, ps] : model.stores()) sections.emplace_back(name, ps);
  save_checkpoint(path, sections, meta, with_opt_state);
}

struct LoadedModel {
  Model model;
  std::map<std::string, std::string> meta;
};

inline LoadedModel load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  const auto kind = ck.meta.find("kind");
  if (kind == ck.meta.end() || kind->second != "sastnet-model")
    throw IoError("not a model checkpoint: " + path);
  const auto cfg_it = ck.meta.find("model_config");
  if (cfg_it == ck.meta.end())
    throw IoError("model checkpoint lacks its configuration: " + path);
  const ModelConfig cfg = model_config_from_json(cfg_it->second);

  LoadedModel out{Model(cfg, /*init_seed=*/0), std::move(ck.meta)};
  for (auto& [name, ps] : out.model.stores()) {
    const auto sec = ck.sections.find(name);
    if (sec == ck.sections.end())
      throw IoError("model checkpoint lacks section '" + name + "': " + path);
    restore_params(*ps, sec->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inference on one recording: deterministic, mask-free, centered block. The
// semantic stream reads the full recording (it pads to its own fixed
// duration); ties resolve to the lowest class index via the first-maximum
// rule of argmax_row.
// ---------------------------------------------------------------------------

struct InferResult {
  int label = -1;
  Matf logits;  // 1 x n_classes, forward values
};

inline InferResult infer(Model& model, const SemanticBackbone* semantic,
                         const Waveform& w, FusionCapture* cap = nullptr,
                         std::vector<Matf>* readout_cap = nullptr) {
  const ModelConfig& cfg = model.config();
  Matf o_sem;
  if (cfg.uses_semantic()) {
    if (!semantic)
      throw ContractError("infer: variant '" +
                          std::string(to_string(cfg.variant)) +
                          "' needs the pretrained semantic backbone");
    o_sem = encode_semantic(*semantic, w);
  }
  const Index n = cfg.coarse.in_samples;
  const Matf block = wave_block(w, n, centered_block_offset(w, n));

  Tape<float> t;
  Binding<float> bind;
  const ModelForward fwd =
      model.forward(t, bind, block, cfg.uses_semantic() ? &o_sem : nullptr,
                    /*plan=*/nullptr, /*label=*/-1, cap, readout_cap);
  InferResult out;
  out.logits = t.val(fwd.logits);
  out.label = static_cast<int>(argmax_row(out.logits));
  return out;
}

}  // namespace sastnet

#endif  // SASTNET_MODEL_HPP_
