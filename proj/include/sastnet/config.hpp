// sastnet/config.hpp
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
// Run configuration: the ablation variants, the training-loop knobs, and the
// bundled per-run configuration with two named profiles. "desk" is the
// CPU-scale profile every test and acceptance run uses; "paper" echoes the
// documented large-scale hyperparameters (batch 12, 40 epochs, lr 5e-6,
// weight decay 1e-4, mask ratio 0.4, margin 0.1, semantic width 768) for
// config fidelity, not for desk execution. Configs round-trip through JSON
// and carry a content digest so artifacts can verify their inputs.

#ifndef SASTNET_CONFIG_HPP_
#define SASTNET_CONFIG_HPP_

#include <string>

#include "sastnet/acoustic.hpp"
#include "sastnet/classifier.hpp"
#include "sastnet/corpus.hpp"
#include "sastnet/fusion.hpp"
#include "sastnet/semantic.hpp"

namespace sastnet {

// Ablation variants. Each toggles which branch exists and what trains:
//   kBaseline      coarse encoder -> classifier, cross-entropy only.
//   kSMae          coarse + masked autoencoder with ONE decoder (plain masked
//                  MSE), readout -> classifier. No semantic branch, no fusion.
//   kMMae          kSMae with one decoder PER CLASS and the margin loss.
//   kSemPlusMae    frozen semantic branch + fusion + multi-decoder MAE; the
//                  coarse encoder stays frozen at its initialization.
//   kCoarsePlusMae no semantic branch; fusion's second stream is a projection
//                  of the coarse embedding itself; coarse trains.
//   kSastnet       frozen semantic + trainable coarse + multi-decoder MAE +
//                  fusion + adaptive loss weighting. The full model.
enum class Variant {
  kBaseline,
  kSMae,
  kMMae,
  kSemPlusMae,
  kCoarsePlusMae,
  kSastnet,
};

enum class CoarseInit { kRandom, kTuned };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kSMae: return "s_mae";
    case Variant::kMMae: return "m_mae";
    case Variant::kSemPlusMae: return "sem_mae";
    case Variant::kCoarsePlusMae: return "coarse_mae";
    case Variant::kSastnet: return "sastnet";
  }
  throw ContractError("unknown variant");
}

inline Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::kBaseline;
  if (s == "s_mae") return Variant::kSMae;
  if (s == "m_mae") return Variant::kMMae;
  if (s == "sem_mae") return Variant::kSemPlusMae;
  if (s == "coarse_mae") return Variant::kCoarsePlusMae;
  if (s == "sastnet") return Variant::kSastnet;
  throw UsageError("unknown variant '" + s +
                   "' (expected baseline|s_mae|m_mae|sem_mae|coarse_mae|sastnet)");
}

inline const char* to_string(CoarseInit c) {
  switch (c) {
    case CoarseInit::kRandom: return "random";
    case CoarseInit::kTuned: return "tuned";
  }
  throw ContractError("unknown coarse init");
}

inline CoarseInit parse_coarse_init(const std::string& s) {
  if (s == "random") return CoarseInit::kRandom;
  if (s == "tuned") return CoarseInit::kTuned;
  throw UsageError("unknown coarse init '" + s + "' (expected random|tuned)");
}

// Architecture of one run. The derived fields (decoder count, classifier
// width and class count, fusion input widths) are filled by finalize(); a
// finalized config fully determines the parameter set.
struct ModelConfig {
  Task task = Task::kAux;
  Variant variant = Variant::kSastnet;
  CoarseInit coarse_init = CoarseInit::kRandom;
  CoarseConfig coarse;
  MaeConfig mae;
  Index d_readout = 64;
  Index readout_heads = 4;
  FusionConfig fusion;
  ClassifierConfig cls;
  double margin = 0.1;
  Index d_sem = 64;   // semantic branch output width feeding the fusion
  Index l_sem = 32;   // semantic branch output frames (for documentation)
  bool finalized = false;

  bool uses_mae() const { return variant != Variant::kBaseline; }
  bool uses_margin() const {
    return uses_mae() && variant != Variant::kSMae;
  }
  bool uses_semantic() const {
    return variant == Variant::kSemPlusMae || variant == Variant::kSastnet;
  }
  bool uses_fusion() const {
    return uses_semantic() || variant == Variant::kCoarsePlusMae;
  }
  bool coarse_trainable() const { return variant != Variant::kSemPlusMae; }
  bool uses_awl() const { return uses_mae(); }

  int n_decoders() const {
    return variant == Variant::kSMae ? 1 : n_classes(task);
  }

  // Derives the dependent fields from the free ones.
  void finalize() {
    mae.frames = coarse.out_frames();
    mae.channels = coarse.d_model;
    mae.n_decoders = uses_mae() ? n_decoders() : 1;
    fusion.d_sem = uses_semantic() ? d_sem : coarse.d_model;
    fusion.d_ac = d_readout;
    cls.n_classes = n_classes(task);
    if (uses_fusion())
      cls.d_in = fusion.d_model;
    else if (uses_mae())
      cls.d_in = d_readout;
    else
      cls.d_in = coarse.d_model;
    finalized = true;
    validate();
  }

  void validate() const {
    if (!finalized) throw ContractError("ModelConfig: call finalize() first");
    coarse.validate();
    if (uses_mae()) mae.validate();
    if (uses_fusion()) fusion.validate();
    cls.validate();
    if (margin < 0) throw ContractError("ModelConfig: margin must be >= 0");
    if (d_readout <= 0 || readout_heads <= 0 || d_readout % readout_heads != 0)
      throw ContractError("ModelConfig: readout width must divide into heads");
    if (uses_margin() && mae.n_decoders != n_classes(task))
      throw ContractError("ModelConfig: margin variants need one decoder per class");
  }
};

// Training-loop knobs. Mask ratio and margin live in ModelConfig (they are
// architecture-coupled); this holds the optimizer and schedule.
struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  OptimConfig optim{1e-3, 0.9, 0.999, 1e-8, 1e-4, 50};
  bool augment = false;  // waveform-level augmentation, train split only
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw UsageError("train: epochs must be >= 1");
    if (batch_size < 1) throw UsageError("train: batch size must be >= 1");
    if (!(optim.lr > 0)) throw UsageError("train: learning rate must be > 0");
    if (optim.weight_decay < 0) throw UsageError("train: negative weight decay");
  }
};

// Everything one run needs, bundled: corpus generation, the frozen semantic
// branch, its pretraining recipe, the model, and the training loop.
struct RunConfig {
  std::string profile = "desk";  // desk | paper | custom
  GenerationConfig gen;
  SemanticConfig semantic;
  SemanticPretrainConfig pretrain;
  ModelConfig model;
  TrainConfig train;
};

RunConfig desk_run_config(Task task);
RunConfig paper_run_config(Task task);

// Full-bundle validation, including the profile pins: a config claiming a
// named profile must carry that profile's documented values.
void validate_run_config(const RunConfig& cfg);

// Canonical JSON (sorted keys, 2-space indent). The digest hashes this text.
std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
void save_run_config(const RunConfig& cfg, const std::string& path);
RunConfig load_run_config(const std::string& path);
std::uint64_t config_digest(const RunConfig& cfg);

// ModelConfig alone, for checkpoint metadata: a checkpoint must be loadable
// without the original config file.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace sastnet

#endif  // SASTNET_CONFIG_HPP_
