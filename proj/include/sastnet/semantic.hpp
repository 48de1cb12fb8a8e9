// sastnet/semantic.hpp
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
// Content-robust semantic branch: a small causal transformer over log-mel
// frames of the zero-padded input, truncated to the first K frames and
// pair-pooled. The backbone trains once on utterance-id classification over
// bona fide audio, then stays frozen for every downstream run; causal
// attention makes the kept frames exactly independent of trailing pad length.

#ifndef SASTNET_SEMANTIC_HPP_
#define SASTNET_SEMANTIC_HPP_

#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "sastnet/checkpoint.hpp"
#include "sastnet/corpus.hpp"
#include "sastnet/dsp.hpp"
#include "sastnet/nn.hpp"

namespace sastnet {

struct SemanticConfig {
  int sample_rate = 16000;
  double pad_seconds = 3.0;  // fixed input duration before encoding
  int n_fft = 512;
  int hop = 160;
  int n_mels = 64;
  float mel_mean = -6.0f;
  float mel_std = 3.0f;
  Index d_model = 64;  // embedding width
  Index n_layers = 4;
  Index n_heads = 4;
  Index d_ff = 256;
  Index truncate_frames = 64;  // K: frames kept before pair pooling

  Index pad_samples() const {
    return static_cast<Index>(std::llround(pad_seconds * sample_rate));
  }
  Index full_frames() const { return stft_num_frames(pad_samples(), hop); }
  Index out_frames() const { return truncate_frames / 2; }

  MelConfig mel() const {
    MelConfig m;
    m.n_fft = n_fft;
    m.hop = hop;
    m.n_mels = n_mels;
    m.sample_rate = sample_rate;
    m.fmin = 0.0f;
    m.fmax = static_cast<float>(sample_rate) / 2.0f;
    return m;
  }

  void validate() const {
    if (pad_seconds <= 0) throw UsageError("semantic: pad duration must be positive");
    if (truncate_frames < 2 || truncate_frames % 2 != 0)
      throw UsageError("semantic: truncate_frames must be even and >= 2 "
                       "(outputs pool consecutive frame pairs)");
    if (truncate_frames > full_frames())
      throw UsageError("semantic: truncate_frames exceeds padded frame count");
    if (d_model % n_heads != 0)
      throw UsageError("semantic: d_model must divide into heads");
    if (n_layers < 1 || n_mels < 1 || hop < 1) throw UsageError("semantic: bad dims");
  }
};

// Documented large-scale configuration: 30 s pad at a 20 ms hop gives 1500
// frames; truncating to 256 and pair-pooling yields 128 frames of width 768.
inline SemanticConfig semantic_paper_config() {
  SemanticConfig c;
  c.pad_seconds = 30.0;
  c.hop = 320;
  c.n_mels = 80;
  c.d_model = 768;
  c.n_layers = 4;
  c.n_heads = 8;
  c.d_ff = 3072;
  c.truncate_frames = 256;
  return c;
}

class SemanticBackbone {
 public:
  SemanticBackbone(const SemanticConfig& cfg, std::uint64_t init_seed)
      : cfg_(cfg), params_(Rng(init_seed).derive("semantic-init")) {
    cfg_.validate();
    in_proj_ = LinearM<float>(params_, "sem.in", cfg_.n_mels, cfg_.d_model);
    for (Index l = 0; l < cfg_.n_layers; ++l)
      layers_.emplace_back(params_, "sem.layer" + std::to_string(l),
                           cfg_.d_model, cfg_.n_heads, cfg_.d_ff);
    ln_f_ = LayerNormM<float>(params_, "sem.ln_f", cfg_.d_model);
    pos_ = sinusoidal_positions<float>(cfg_.full_frames(), cfg_.d_model);
    mask_ = causal_mask<float>(cfg_.full_frames());
  }

  const SemanticConfig& config() const { return cfg_; }
  ParamStore<float>& params() { return params_; }
  const ParamStore<float>& params() const { return params_; }
  std::uint64_t digest() const { return params_.digest(); }

  // Tape forward over a full padded log-mel matrix (full_frames x n_mels).
  // Returns the node of the frame embeddings (full_frames x d_model).
  int forward(Tape<float>& t, Binding<float>& bind, int mel_node) const {
    if (t.val(mel_node).rows() != cfg_.full_frames() ||
        t.val(mel_node).cols() != cfg_.n_mels)
      throw ContractError("semantic forward: expected " +
                          std::to_string(cfg_.full_frames()) + "x" +
                          std::to_string(cfg_.n_mels) + " log-mel input");
    int x = in_proj_(t, bind, params_mut(), mel_node);
    x = ops::add(t, x, t.constant(pos_));
    for (const auto& layer : layers_) x = layer(t, bind, params_mut(), x, &mask_);
    return ln_f_(t, bind, params_mut(), x);
  }

 private:
  // Modules take ParamStore& (they may lazily bind); the store itself is
  // logically const during forward passes.
  ParamStore<float>& params_mut() const {
    return const_cast<ParamStore<float>&>(params_);
  }

  SemanticConfig cfg_;
  ParamStore<float> params_;
  LinearM<float> in_proj_;
  std::vector<EncoderLayerM<float>> layers_;
  LayerNormM<float> ln_f_;
  Matf pos_;
  Matf mask_;
};

// Zero-pads to the configured duration and produces the normalized log-mel
// matrix the backbone consumes.
inline Matf semantic_log_mel(const SemanticConfig& cfg, const Waveform& w) {
  if (w.sample_rate != cfg.sample_rate)
    throw ContractError("semantic_log_mel: sample rate mismatch");
  if (w.size() <= 0) throw ContractError("semantic_log_mel: empty waveform");
  if (w.size() > cfg.pad_samples())
    throw ContractError(
        "semantic_log_mel: input longer than the fixed pad duration (" +
        std::to_string(w.size()) + " > " + std::to_string(cfg.pad_samples()) +
        " samples); refusing to truncate content");
  Vecf padded = Vecf::Zero(cfg.pad_samples());
  padded.head(w.size()) = w.samples;
  Matf m = log_mel(padded, cfg.mel());
  return (m.array() - cfg.mel_mean).matrix() / cfg.mel_std;
}

// Average-pools non-overlapping consecutive row pairs; rows must be even.
inline Matf pool_pairs(const Matf& x) {
  if (x.rows() % 2 != 0)
    throw ContractError("pool_pairs: row count must be even");
  Matf pooled(x.rows() / 2, x.cols());
  for (Index i = 0; i < pooled.rows(); ++i)
    pooled.row(i) = 0.5f * (x.row(2 * i) + x.row(2 * i + 1));
  return pooled;
}

// Full chain: pad -> log-mel -> backbone -> truncate to the first K frames ->
// average-pool consecutive pairs. Output is (K/2) x d_model. Pure inference;
// no gradients flow (the backbone is frozen downstream).
inline Matf encode_semantic(const SemanticBackbone& backbone, const Waveform& w) {
  const SemanticConfig& cfg = backbone.config();
  const Matf mel = semantic_log_mel(cfg, w);
  Tape<float> t;
  Binding<float> bind;
  const int out = backbone.forward(t, bind, t.constant(mel));
  return pool_pairs(t.val(out).topRows(cfg.truncate_frames));
}

// Throws when the frozen contract is violated.
inline void assert_frozen(const SemanticBackbone& backbone,
                          std::uint64_t before_digest) {
  if (backbone.params().entries.empty())
    throw ContractError("assert_frozen: backbone has no parameters");
  if (backbone.digest() != before_digest)
    throw ContractError(
        "assert_frozen: semantic backbone parameters changed during a run "
        "that must keep them frozen");
}

// ---------------------------------------------------------------------------
// Backbone pretraining: utterance-id classification on bona fide audio.
// ---------------------------------------------------------------------------

struct SemanticPretrainConfig {
  int epochs = 300;
  int batch_size = 2;
  OptimConfig optim{1e-3, 0.9, 0.999, 1e-8, 1e-4, 20};
  // Stop once post-epoch accuracy on the clean train items holds at 100%
  // for this many consecutive epochs. Probes are measured afterwards.
  int patience_perfect_epochs = 2;
  int min_epochs = 10;
  // Frames pooled by the temporary utterance-id head. Wider than the
  // downstream truncation so the head sees most of the voiced span.
  Index probe_frames = 128;
  // Train-time mel perturbations (gain shift, jitter, smoothing, small
  // frequency roll, masking stripes) that push the representation toward
  // content cues that survive resynthesis. Probes run on clean inputs.
  bool augment = true;
};

struct SemanticPretrainResult {
  double probe_train_accuracy = 0.0;  // bona fide train items
  // Codec-processed twins of the train utterances, never seen by the probe
  // head. The scalar-quantization subset is the robustness contract; the
  // all-twin figure (every codec family) is reported as a diagnostic.
  double probe_scalar_twin_accuracy = 0.0;
  double probe_codec_accuracy = 0.0;
  int n_scalar_twins = 0;
  int n_codec_twins = 0;
  int epochs_run = 0;
};

namespace detail {

struct ProbeItem {
  Matf mel;    // full_frames x n_mels
  int label;   // contiguous class index
};

inline int semantic_logits_node(const SemanticBackbone& backbone,
                                ParamStore<float>& head_ps,
                                const LinearM<float>& head, Tape<float>& t,
                                Binding<float>& bind, const Matf& mel,
                                Index pool_frames) {
  const int frames = backbone.forward(t, bind, t.constant(mel));
  const Index span = std::min(pool_frames, mel.rows());
  const int kept = ops::slice_rows(t, frames, 0, span);
  const int pooled = ops::mean_rows(t, kept);  // 1 x d_model
  return head(t, bind, head_ps, pooled);       // 1 x n_classes
}

// Mel-domain perturbations for pretraining: gain shift, entry jitter,
// temporal smoothing, a one-bin frequency roll, and masking stripes. The
// goal is a representation that keys on content structure rather than fine
// spectral texture, so the probe transfers to resynthesized twins.
inline Matf augment_mel(const Matf& mel, Rng rng) {
  Matf out = mel;
  const Index frames = out.rows();
  const Index bins = out.cols();
  out.array() += static_cast<float>(rng.uniform(-0.45, 0.45));
  for (Index r = 0; r < frames; ++r)
    for (Index c = 0; c < bins; ++c)
      out(r, c) += static_cast<float>(rng.normal() * 0.05);
  if (rng.uniform() < 0.5 && frames >= 3) {
    Matf smooth = out;
    for (Index r = 1; r + 1 < frames; ++r)
      smooth.row(r) = (out.row(r - 1) + out.row(r) + out.row(r + 1)) / 3.0f;
    out = std::move(smooth);
  }
  const std::int64_t roll = rng.randint(3) - 1;  // -1, 0, +1 bins
  if (roll != 0 && bins >= 2) {
    Matf rolled = out;
    if (roll > 0) {
      rolled.rightCols(bins - 1) = out.leftCols(bins - 1);
      rolled.col(0) = out.col(0);
    } else {
      rolled.leftCols(bins - 1) = out.rightCols(bins - 1);
      rolled.col(bins - 1) = out.col(bins - 1);
    }
    out = std::move(rolled);
  }
  const float fill = out.mean();
  const Index stripe_t = static_cast<Index>(rng.randint(7));  // 0..6 frames
  if (stripe_t > 0 && stripe_t < frames) {
    const Index at = static_cast<Index>(rng.randint(frames - stripe_t + 1));
    out.middleRows(at, stripe_t).setConstant(fill);
  }
  const Index stripe_f = static_cast<Index>(rng.randint(5));  // 0..4 bins
  if (stripe_f > 0 && stripe_f < bins) {
    const Index at = static_cast<Index>(rng.randint(bins - stripe_f + 1));
    out.middleCols(at, stripe_f).setConstant(fill);
  }
  return out;
}

}  // namespace detail

// Trains the backbone plus a temporary utterance-id head on bona fide train
// records, then measures the content probe on (a) the same bona fide items
// and (b) their codec-processed twins from the same split. The head is
// discarded; only backbone parameters persist.
inline SemanticPretrainResult pretrain_toy_semantic(
    SemanticBackbone& backbone, const CorpusManifest& manifest,
    const SemanticPretrainConfig& pcfg, std::uint64_t seed) {
  const SemanticConfig& cfg = backbone.config();
  const SplitView split = split_seen_unseen(manifest, manifest.config.id_threshold());

  // Contiguous class ids over the training utterances.
  std::map<long long, int> class_of;
  for (const auto& r : split.train.records)
    if (r.profile_id.empty() && !class_of.count(r.utt_id)) {
      const int next = static_cast<int>(class_of.size());
      class_of[r.utt_id] = next;
    }
  const int n_cls = static_cast<int>(class_of.size());
  if (n_cls < 2)
    throw ContractError("pretrain_toy_semantic: need >= 2 bona fide train "
                        "utterances, found " + std::to_string(n_cls));

  std::vector<detail::ProbeItem> bona, twins, scalar_twins;
  for (const auto& r : split.train.records) {
    detail::ProbeItem item;
    item.mel = semantic_log_mel(cfg, load_record_audio(manifest, r));
    item.label = class_of.at(r.utt_id);
    if (r.profile_id.empty()) {
      bona.push_back(std::move(item));
    } else {
      if (r.label.vq == 3) scalar_twins.push_back(item);  // scalar quantization
      twins.push_back(std::move(item));
    }
  }
  if (twins.empty())
    throw ContractError("pretrain_toy_semantic: no codec twins in the train split");

  ParamStore<float> head_ps(Rng(seed).derive("semantic-head-init"));
  const LinearM<float> head(head_ps, "probe.head", cfg.d_model, n_cls);

  const Rng run_rng(seed);
  SemanticPretrainResult result;

  auto probe_accuracy = [&](const std::vector<detail::ProbeItem>& items) {
    int n_right = 0;
    for (const auto& item : items) {
      Tape<float> t;
      Binding<float> bind;
      const int logits = detail::semantic_logits_node(
          backbone, head_ps, head, t, bind, item.mel, pcfg.probe_frames);
      if (argmax_row(t.val(logits)) == item.label) ++n_right;
    }
    return static_cast<double>(n_right) / static_cast<double>(items.size());
  };

  std::int64_t step = 0;
  int perfect_streak = 0;
  for (int epoch = 0; epoch < pcfg.epochs; ++epoch) {
    Rng order_rng = run_rng.derive("order", {epoch});
    std::vector<int> order(bona.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    order_rng.shuffle(order);

    int correct = 0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), pos + static_cast<std::size_t>(pcfg.batch_size));
      backbone.params().zero_grad();
      head_ps.zero_grad();
      const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);
      for (; pos < batch_end; ++pos) {
        const auto& item = bona[static_cast<std::size_t>(order[pos])];
        Tape<float> t;
        Binding<float> bind;
        Rng aug_rng = run_rng.derive("augment", {epoch, order[pos]});
        // Mix perturbed and clean presentations so the optimizer stays
        // anchored to the true inputs while learning the invariances.
        const bool perturb = pcfg.augment && aug_rng.uniform() < 0.7;
        const Matf mel =
            perturb ? detail::augment_mel(item.mel, aug_rng) : item.mel;
        const int logits = detail::semantic_logits_node(
            backbone, head_ps, head, t, bind, mel, pcfg.probe_frames);
        if (argmax_row(t.val(logits)) == item.label) ++correct;
        const int loss = ops::cross_entropy(t, logits, item.label);
        t.backward(loss);
        bind.accumulate(t, backbone.params(), inv_batch);
        bind.accumulate(t, head_ps, inv_batch);
      }
      ++step;
      adamw_step(backbone.params(), pcfg.optim, step);
      adamw_step(head_ps, pcfg.optim, step);
    }
    result.epochs_run = epoch + 1;

    const double clean_acc = probe_accuracy(bona);
    if (std::getenv("SASTNET_DEBUG_PRETRAIN"))
      std::fprintf(stderr, "epoch %d: running %d/%zu clean %.3f\n", epoch,
                   correct, bona.size(), clean_acc);
    perfect_streak = (clean_acc == 1.0) ? perfect_streak + 1 : 0;
    if (result.epochs_run >= pcfg.min_epochs &&
        perfect_streak >= pcfg.patience_perfect_epochs)
      break;
  }

  result.probe_train_accuracy = probe_accuracy(bona);
  result.probe_codec_accuracy = probe_accuracy(twins);
  result.probe_scalar_twin_accuracy =
      scalar_twins.empty() ? 0.0 : probe_accuracy(scalar_twins);
  result.n_scalar_twins = static_cast<int>(scalar_twins.size());
  result.n_codec_twins = static_cast<int>(twins.size());
  return result;
}

// ---------------------------------------------------------------------------
// Persistence. The config rides in checkpoint metadata so a loaded backbone
// is complete without external context.
// ---------------------------------------------------------------------------

inline void save_semantic(const SemanticBackbone& backbone,
                          const std::string& path,
                          std::map<std::string, std::string> extra_meta = {}) {
  const SemanticConfig& c = backbone.config();
  std::map<std::string, std::string> meta = std::move(extra_meta);
  meta["kind"] = "semantic-backbone";
  meta["sample_rate"] = std::to_string(c.sample_rate);
  meta["pad_seconds"] = std::to_string(c.pad_seconds);
  meta["n_fft"] = std::to_string(c.n_fft);
  meta["hop"] = std::to_string(c.hop);
  meta["n_mels"] = std::to_string(c.n_mels);
  meta["mel_mean"] = std::to_string(c.mel_mean);
  meta["mel_std"] = std::to_string(c.mel_std);
  meta["d_model"] = std::to_string(c.d_model);
  meta["n_layers"] = std::to_string(c.n_layers);
  meta["n_heads"] = std::to_string(c.n_heads);
  meta["d_ff"] = std::to_string(c.d_ff);
  meta["truncate_frames"] = std::to_string(c.truncate_frames);
  save_checkpoint(path, {{"semantic", &backbone.params()}}, meta,
                  /*with_opt_state=*/false);
}

inline SemanticBackbone load_semantic(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  const auto need = [&](const std::string& key) {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end())
      throw IoError("semantic checkpoint missing meta key '" + key + "'");
    return it->second;
  };
  if (need("kind") != "semantic-backbone")
    throw IoError("'" + path + "' is not a semantic backbone checkpoint");
  SemanticConfig c;
  c.sample_rate = std::stoi(need("sample_rate"));
  c.pad_seconds = std::stod(need("pad_seconds"));
  c.n_fft = std::stoi(need("n_fft"));
  c.hop = std::stoi(need("hop"));
  c.n_mels = std::stoi(need("n_mels"));
  c.mel_mean = std::stof(need("mel_mean"));
  c.mel_std = std::stof(need("mel_std"));
  c.d_model = std::stoi(need("d_model"));
  c.n_layers = std::stoi(need("n_layers"));
  c.n_heads = std::stoi(need("n_heads"));
  c.d_ff = std::stoi(need("d_ff"));
  c.truncate_frames = std::stoi(need("truncate_frames"));
  SemanticBackbone backbone(c, /*init_seed=*/0);
  auto it = ck.sections.find("semantic");
  if (it == ck.sections.end())
    throw IoError("semantic checkpoint has no 'semantic' section");
  restore_params(backbone.params(), it->second);
  return backbone;
}

}  // namespace sastnet

#endif  // SASTNET_SEMANTIC_HPP_
