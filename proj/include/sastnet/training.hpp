// sastnet/training.hpp
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
// The training loop. Each step runs augment -> fixed-length block -> branch
// features -> (train-only) mask plan -> forward -> losses -> combined loss ->
// optimizer step. Every random choice is keyed by (seed, epoch, item index),
// so a rerun with the same config reproduces the run byte for byte; item
// preparation is pure and could run concurrently, while the parameter update
// itself is strictly sequential. The dev set is the seen-content test split,
// and the best checkpoint is chosen by dev macro-F1.

#ifndef SASTNET_TRAINING_HPP_
#define SASTNET_TRAINING_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sastnet/evaluation.hpp"
#include "sastnet/model.hpp"

namespace sastnet {

// ---------------------------------------------------------------------------
// Waveform augmentation: a near-identity three-tap convolutive channel plus
// additive noise at a 25-40 dB signal-to-noise ratio. Deterministic given the
// Rng. Note that the noise floor it adds partially fills recorded silence,
// which is one of the cues the silence analysis studies — the desk profile
// therefore trains without augmentation by default.
// ---------------------------------------------------------------------------

inline Waveform augment_waveform(const Waveform& w, Rng rng) {
  if (w.size() == 0) return w;
  Waveform out;
  out.sample_rate = w.sample_rate;
  const auto a = static_cast<float>(rng.uniform(-0.08, 0.08));
  const auto b = static_cast<float>(rng.uniform(-0.08, 0.08));
  const Index n = w.size();
  out.samples.resize(n);
  for (Index i = 0; i < n; ++i) {
    float y = w.samples(i);
    if (i > 0) y += a * w.samples(i - 1);
    if (i + 1 < n) y += b * w.samples(i + 1);
    out.samples(i) = y;
  }
  const double snr_db = rng.uniform(25.0, 40.0);
  const double power = static_cast<double>(out.samples.squaredNorm()) /
                       static_cast<double>(n);
  if (power > 0.0) {
    const auto sigma = static_cast<float>(std::sqrt(power) *
                                          db_to_amplitude(-snr_db));
    for (Index i = 0; i < n; ++i)
      out.samples(i) += sigma * static_cast<float>(rng.normal());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coarse-encoder initialization from a previously trained baseline run. The
// "tuned" mode seeds the coarse encoder with the baseline's weights instead
// of random initialization.
// ---------------------------------------------------------------------------

inline void restore_tuned_coarse(Model& model, const std::string& path) {
  if (path.empty())
    throw UsageError(
        "coarse init 'tuned' requires a baseline checkpoint; pass the "
        "baseline run's best checkpoint path");
  if (!std::filesystem::exists(path))
    throw IoError("tuned coarse init: baseline checkpoint not found: " + path +
                  "; train the baseline variant first and point at its best "
                  "checkpoint");
  const Checkpoint ck = load_checkpoint(path);
  const auto sec = ck.sections.find("coarse");
  if (sec == ck.sections.end())
    throw ContractError("tuned coarse init: checkpoint '" + path +
                        "' has no coarse-encoder section");
  restore_params(model.coarse_ps(), sec->second);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string out_dir;            // receives best.ckpt, last.ckpt, train_log.jsonl
  std::string tuned_coarse_path;  // baseline checkpoint for the tuned init
  std::string resume_path;        // continue from a previous last.ckpt
};

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;  // mean total loss over the epoch's steps
  double dev_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochStat> history;
  double best_dev_f1 = -1.0;
  int best_epoch = -1;
  std::int64_t steps = 0;
  std::string best_path, last_path, log_path;
  std::uint64_t semantic_digest_before = 0;
  std::uint64_t semantic_digest_after = 0;
};

namespace detail {

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string history_to_string(const std::vector<EpochStat>& h) {
  std::string out;
  for (const auto& e : h) {
    if (!out.empty()) out += ";";
    out += std::to_string(e.epoch) + "," + fmt_g(e.train_loss) + "," +
           fmt_g(e.dev_f1);
  }
  return out;
}

inline std::vector<EpochStat> history_from_string(const std::string& s) {
  std::vector<EpochStat> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    EpochStat e;
    if (std::sscanf(item.c_str(), "%d,%lf,%lf", &e.epoch, &e.train_loss,
                    &e.dev_f1) == 3)
      out.push_back(e);
  }
  return out;
}

// Deterministic single-record inference against a cached semantic feature.
inline int infer_with_cache(Model& model, const Matf* o_sem,
                            const Waveform& w) {
  const Index n = model.config().coarse.in_samples;
  const Matf block = wave_block(w, n, centered_block_offset(w, n));
  Tape<float> t;
  Binding<float> bind;
  const ModelForward fwd = model.forward(t, bind, block, o_sem, nullptr, -1);
  return static_cast<int>(argmax_row(t.val(fwd.logits)));
}

}  // namespace detail

// Trains one model on the manifest's train split, scoring the seen-content
// test split as the dev set after every epoch. Artifacts land in
// opt.out_dir: best.ckpt (by dev macro-F1, parameters only), last.ckpt
// (with optimizer state, for resuming), and train_log.jsonl with one record
// per optimizer step: {"step", "epoch", "loss_total", "loss_cls",
// "loss_recon", "w_cls", "w_recon", "lr"}. A variant that freezes a
// component never steps it, and the frozen semantic backbone's digest is
// asserted unchanged end to end.
inline TrainResult train_model(const RunConfig& cfg,
                               const CorpusManifest& manifest,
                               const SemanticBackbone* semantic,
                               const TrainOptions& opt) {
  validate_run_config(cfg);
  if (cfg.model.uses_semantic() && !semantic)
    throw ContractError("train: variant '" +
                        std::string(to_string(cfg.model.variant)) +
                        "' needs the pretrained semantic backbone");
  if (opt.out_dir.empty()) throw UsageError("train: output directory not set");
  std::filesystem::create_directories(opt.out_dir);

  const SplitView split =
      split_seen_unseen(manifest, manifest.config.id_threshold());
  const std::vector<UtteranceRecord>& train_recs = split.train.records;
  const std::vector<UtteranceRecord>& dev_recs = split.test_seen.records;
  if (train_recs.empty()) throw ContractError("train: empty train split");
  if (dev_recs.empty()) throw ContractError("train: empty dev split");

  const Task task = cfg.model.task;
  Model model(cfg.model, cfg.train.seed);
  if (cfg.model.coarse_init == CoarseInit::kTuned)
    restore_tuned_coarse(model, opt.tuned_coarse_path);

  TrainResult result;
  result.best_path = opt.out_dir + "/best.ckpt";
  result.last_path = opt.out_dir + "/last.ckpt";
  result.log_path = opt.out_dir + "/train_log.jsonl";
  result.semantic_digest_before = semantic ? semantic->digest() : 0;
  const std::uint64_t frozen_coarse_digest =
      cfg.model.coarse_trainable() ? 0 : model.coarse_ps().digest();

  // Resume: restore parameters and optimizer moments, continue the counters.
  std::int64_t step = 0;
  int start_epoch = 0;
  if (!opt.resume_path.empty()) {
    const Checkpoint ck = load_checkpoint(opt.resume_path);
    const auto kind = ck.meta.find("kind");
    if (kind == ck.meta.end() || kind->second != "sastnet-model")
      throw IoError("resume: not a model checkpoint: " + opt.resume_path);
    for (auto& [name, ps] : model.stores()) {
      const auto sec = ck.sections.find(name);
      if (sec == ck.sections.end())
        throw IoError("resume: checkpoint lacks section '" + name + "'");
      restore_params(*ps, sec->second);
    }
    const auto get_meta = [&ck](const char* key) -> std::string {
      const auto it = ck.meta.find(key);
      return it == ck.meta.end() ? std::string() : it->second;
    };
    step = std::stoll(get_meta("step"));
    start_epoch = std::stoi(get_meta("epoch")) + 1;
    result.history = detail::history_from_string(get_meta("history"));
    if (!get_meta("best_dev_f1").empty()) {
      result.best_dev_f1 = std::stod(get_meta("best_dev_f1"));
      result.best_epoch = std::stoi(get_meta("best_epoch"));
    }
  }

  // All waveforms fit desk-scale memory comfortably; load them once.
  std::vector<Waveform> train_waves, dev_waves;
  std::vector<int> train_labels, dev_labels;
  for (const auto& r : train_recs) {
    train_waves.push_back(load_record_audio(split.train, r));
    train_labels.push_back(r.label.index_for(task));
  }
  for (const auto& r : dev_recs) {
    dev_waves.push_back(load_record_audio(split.test_seen, r));
    dev_labels.push_back(r.label.index_for(task));
  }

  // The semantic backbone is frozen and the eval inputs are fixed, so their
  // features are computed once. Train features are cacheable only without
  // augmentation (augmentation changes the waveform the branch reads).
  const bool uses_sem = cfg.model.uses_semantic();
  std::vector<Matf> sem_train, sem_dev;
  if (uses_sem) {
    for (const auto& w : dev_waves) sem_dev.push_back(encode_semantic(*semantic, w));
    if (!cfg.train.augment)
      for (const auto& w : train_waves)
        sem_train.push_back(encode_semantic(*semantic, w));
  }

  std::ofstream log(result.log_path,
                    opt.resume_path.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot write run log: " + result.log_path);

  Rng root(cfg.train.seed);
  const Index in_samples = cfg.model.coarse.in_samples;
  const Index grid_rows = cfg.model.mae.grid_rows();
  const Index grid_cols = cfg.model.mae.grid_cols();
  std::vector<ParamStore<float>*> trainable = model.trainable_stores();

  for (int epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
    std::vector<int> order(train_recs.size());
    std::iota(order.begin(), order.end(), 0);
    root.derive("order", {epoch}).shuffle(order);

    double epoch_loss = 0.0;
    int epoch_steps = 0;
    for (std::size_t pos = 0; pos < order.size();
         pos += static_cast<std::size_t>(cfg.train.batch_size)) {
      const std::size_t end = std::min(
          order.size(), pos + static_cast<std::size_t>(cfg.train.batch_size));
      const double inv = 1.0 / static_cast<double>(end - pos);
      double total = 0.0, cls = 0.0, rec = 0.0;
      for (std::size_t k = pos; k < end; ++k) {
        const int idx = order[k];
        Waveform w = train_waves[static_cast<std::size_t>(idx)];
        if (cfg.train.augment)
          w = augment_waveform(w, root.derive("augment", {epoch, idx}));
        Matf o_sem_local;
        const Matf* o_sem = nullptr;
        if (uses_sem) {
          if (cfg.train.augment) {
            o_sem_local = encode_semantic(*semantic, w);
            o_sem = &o_sem_local;
          } else {
            o_sem = &sem_train[static_cast<std::size_t>(idx)];
          }
        }
        const Index max_off = max_block_offset(w, in_samples);
        const Index off = root.derive("crop", {epoch, idx})
                              .randint(static_cast<int>(max_off) + 1);
        const Matf block = wave_block(w, in_samples, off);
        MaskPlan plan;
        const MaskPlan* plan_ptr = nullptr;
        if (cfg.model.uses_mae()) {
          plan = plan_mask(grid_rows, grid_cols, cfg.model.mae.mask_ratio,
                           root.derive("mask", {epoch, idx}));
          plan_ptr = &plan;
        }

        Tape<float> t;
        Binding<float> bind;
        const ModelForward fwd =
            model.forward(t, bind, block, o_sem, plan_ptr,
                          train_labels[static_cast<std::size_t>(idx)]);
        t.backward(fwd.loss_total);
        for (ParamStore<float>* ps : trainable) bind.accumulate(t, *ps, inv);

        total += inv * static_cast<double>(t.val(fwd.loss_total)(0, 0));
        cls += inv * static_cast<double>(t.val(fwd.loss_cls)(0, 0));
        if (fwd.loss_recon >= 0)
          rec += inv * static_cast<double>(t.val(fwd.loss_recon)(0, 0));
      }

      ++step;
      for (ParamStore<float>* ps : trainable)
        adamw_step(*ps, cfg.train.optim, step);
      for (ParamStore<float>* ps : trainable) ps->zero_grad();

      const auto [w_cls, w_rec] = model.loss_weights();
      const double warm = cfg.train.optim.warmup_steps > 0
                              ? std::min(1.0, static_cast<double>(step) /
                                                  cfg.train.optim.warmup_steps)
                              : 1.0;
      log << "{\"step\":" << step << ",\"epoch\":" << epoch
          << ",\"loss_total\":" << detail::fmt_g(total)
          << ",\"loss_cls\":" << detail::fmt_g(cls)
          << ",\"loss_recon\":" << detail::fmt_g(rec)
          << ",\"w_cls\":" << detail::fmt_g(static_cast<double>(w_cls))
          << ",\"w_recon\":" << detail::fmt_g(static_cast<double>(w_rec))
          << ",\"lr\":" << detail::fmt_g(cfg.train.optim.lr * warm) << "}\n";
      epoch_loss += total;
      ++epoch_steps;
    }
    log.flush();

    // Dev macro-F1 on the seen-content test split.
    std::vector<int> preds;
    preds.reserve(dev_waves.size());
    for (std::size_t i = 0; i < dev_waves.size(); ++i)
      preds.push_back(detail::infer_with_cache(
          model, uses_sem ? &sem_dev[i] : nullptr, dev_waves[i]));
    const double dev_f1 = macro_f1(preds, dev_labels, n_classes(task));

    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = epoch_loss / std::max(1, epoch_steps);
    stat.dev_f1 = dev_f1;
    result.history.push_back(stat);

    std::map<std::string, std::string> meta;
    meta["epoch"] = std::to_string(epoch);
    meta["step"] = std::to_string(step);
    meta["seed"] = std::to_string(cfg.train.seed);
    meta["config_digest"] = std::to_string(config_digest(cfg));
    meta["history"] = detail::history_to_string(result.history);
    if (dev_f1 > result.best_dev_f1) {
      result.best_dev_f1 = dev_f1;
      result.best_epoch = epoch;
      meta["dev_f1"] = detail::fmt_g(dev_f1);
      save_model(model, result.best_path, meta, /*with_opt_state=*/false);
    }
    meta["best_dev_f1"] = detail::fmt_g(result.best_dev_f1);
    meta["best_epoch"] = std::to_string(result.best_epoch);
    save_model(model, result.last_path, meta, /*with_opt_state=*/true);
  }

  result.steps = step;
  result.semantic_digest_after = semantic ? semantic->digest() : 0;
  if (result.semantic_digest_after != result.semantic_digest_before)
    throw ContractError(
        "train: frozen semantic backbone changed during training");
  if (!cfg.model.coarse_trainable() &&
      model.coarse_ps().digest() != frozen_coarse_digest)
    throw ContractError("train: frozen coarse encoder changed during training");
  return result;
}

// The baseline trainer: coarse encoder plus classifier, cross-entropy only.
// Its best checkpoint supplies the "tuned" coarse initialization.
inline TrainResult train_baseline(RunConfig cfg, const CorpusManifest& manifest,
                                  const TrainOptions& opt) {
  cfg.model.variant = Variant::kBaseline;
  cfg.model.coarse_init = CoarseInit::kRandom;
  cfg.model.finalize();
  return train_model(cfg, manifest, nullptr, opt);
}

// Trainer for every autoencoder-bearing variant.
inline TrainResult train_sastnet(const RunConfig& cfg,
                                 const CorpusManifest& manifest,
                                 const SemanticBackbone* semantic,
                                 const TrainOptions& opt) {
  if (!cfg.model.uses_mae())
    throw UsageError("train_sastnet: use train_baseline for the plain variant");
  return train_model(cfg, manifest, semantic, opt);
}

// ---------------------------------------------------------------------------
// One-batch overfit: architecture sanity. The same batch (fixed blocks,
// fixed mask plans, no augmentation) is stepped repeatedly; a healthy graph
// drives the combined loss below 10% of its initial value well within the
// step budget. The optimizer here is the harness's own aggressive setting —
// the property being checked is gradient flow, not the training recipe.
// ---------------------------------------------------------------------------

struct OverfitResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps_run = 0;
  bool passed = false;
};

inline OverfitResult overfit_one_batch(const RunConfig& cfg,
                                       const CorpusManifest& manifest,
                                       const SemanticBackbone* semantic,
                                       int max_steps = 200,
                                       const OptimConfig* optim = nullptr) {
  if (cfg.model.uses_semantic() && !semantic)
    throw ContractError("overfit: variant needs the semantic backbone");
  const SplitView split =
      split_seen_unseen(manifest, manifest.config.id_threshold());
  if (split.train.records.empty()) throw ContractError("overfit: empty train split");

  const Task task = cfg.model.task;
  const Index in_samples = cfg.model.coarse.in_samples;
  Rng root(cfg.train.seed);

  struct Item {
    Matf block;
    Matf o_sem;
    bool has_sem = false;
    MaskPlan plan;
    bool has_plan = false;
    int label = 0;
  };
  std::vector<Item> items;
  const std::size_t n_items =
      std::min(split.train.records.size(),
               static_cast<std::size_t>(cfg.train.batch_size));
  for (std::size_t i = 0; i < n_items; ++i) {
    const auto& rec = split.train.records[i];
    const Waveform w = load_record_audio(split.train, rec);
    Item it;
    const Index max_off = max_block_offset(w, in_samples);
    const Index off = root.derive("crop", {0, static_cast<int>(i)})
                          .randint(static_cast<int>(max_off) + 1);
    it.block = wave_block(w, in_samples, off);
    if (cfg.model.uses_semantic()) {
      it.o_sem = encode_semantic(*semantic, w);
      it.has_sem = true;
    }
    if (cfg.model.uses_mae()) {
      it.plan = plan_mask(cfg.model.mae.grid_rows(), cfg.model.mae.grid_cols(),
                          cfg.model.mae.mask_ratio,
                          root.derive("mask", {0, static_cast<int>(i)}));
      it.has_plan = true;
    }
    it.label = rec.label.index_for(task);
    items.push_back(std::move(it));
  }

  Model model(cfg.model, cfg.train.seed);
  std::vector<ParamStore<float>*> trainable = model.trainable_stores();
  OptimConfig opt_cfg =
      optim ? *optim : OptimConfig{3e-3, 0.9, 0.999, 1e-8, 0.0, 10};
  // The two uncertainty scalars must travel an O(1) distance for the
  // weighting regularizer to melt, which the per-parameter step budget of
  // the model rate cannot cover; the tiny store is stable at a faster rate.
  OptimConfig awl_cfg = opt_cfg;
  awl_cfg.lr = 10.0 * opt_cfg.lr;

  const double inv = 1.0 / static_cast<double>(items.size());
  const auto batch_loss = [&](bool backprop) {
    double total = 0.0;
    for (const Item& it : items) {
      Tape<float> t;
      Binding<float> bind;
      const ModelForward fwd =
          model.forward(t, bind, it.block, it.has_sem ? &it.o_sem : nullptr,
                        it.has_plan ? &it.plan : nullptr, it.label);
      total += inv * static_cast<double>(t.val(fwd.loss_total)(0, 0));
      if (backprop) {
        t.backward(fwd.loss_total);
        for (ParamStore<float>* ps : trainable) bind.accumulate(t, *ps, inv);
      }
    }
    return total;
  };

  OverfitResult result;
  result.initial_loss = batch_loss(false);
  result.final_loss = result.initial_loss;
  for (int s = 1; s <= max_steps; ++s) {
    const double loss = batch_loss(true);
    for (ParamStore<float>* ps : trainable)
      adamw_step(*ps, ps == &model.awl_ps() ? awl_cfg : opt_cfg, s);
    for (ParamStore<float>* ps : trainable) ps->zero_grad();
    result.final_loss = loss;
    result.steps_run = s;
    if (loss < 0.1 * result.initial_loss) {
      result.passed = true;
      break;
    }
  }
  if (!result.passed)
    result.passed = batch_loss(false) < 0.1 * result.initial_loss;
  return result;
}

// ---------------------------------------------------------------------------
// Ablation matrix: trains each requested variant under the identical corpus
// and seed, evaluates its best checkpoint over the condition grid, and
// persists one row per variant plus the rendered table.
// ---------------------------------------------------------------------------

inline std::vector<AblationRow> run_ablation_matrix(
    const RunConfig& base, const CorpusManifest& manifest,
    const SemanticBackbone* semantic, const std::vector<Variant>& variants,
    const std::string& out_dir) {
  if (variants.empty()) throw UsageError("ablation: no variants requested");
  std::filesystem::create_directories(out_dir);
  std::vector<AblationRow> rows;
  for (const Variant v : variants) {
    RunConfig cfg = base;
    cfg.model.variant = v;
    cfg.model.coarse_init = CoarseInit::kRandom;
    cfg.model.finalize();
    TrainOptions opt;
    opt.out_dir = out_dir + "/" + to_string(v);
    const TrainResult tr = train_model(
        cfg, manifest, cfg.model.uses_semantic() ? semantic : nullptr, opt);
    LoadedModel best = load_model(tr.best_path);
    AblationRow row;
    row.variant = v;
    row.checkpoint_path = tr.best_path;
    row.grid = run_condition_grid(
        best.model, cfg.model.uses_semantic() ? semantic : nullptr, manifest);
    rows.push_back(std::move(row));
  }
  save_ablation(rows, out_dir + "/ablation.json");
  std::ofstream table(out_dir + "/ablation.txt", std::ios::trunc);
  if (!table) throw IoError("cannot write ablation table");
  table << render_ablation_table(rows);
  return rows;
}

}  // namespace sastnet

#endif  // SASTNET_TRAINING_HPP_
