// src/config.cc
//
// Copyright 2026 The sastnet authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// JSON (de)serialization for run configurations, the two named profiles,
// profile-pin validation, and the config content digest.

#include "sastnet/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sastnet {

namespace {

using nlohmann::json;

// Missing keys fall back to the caller-supplied defaults so configs written
// by older tools stay loadable; unknown keys are rejected loudly by check().
template <class T>
void get_or(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void check_keys(const json& j, std::initializer_list<const char*> known,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* k : known)
      if (key == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw UsageError("config: unknown key '" + key + "' in " + where);
  }
}

json gen_to_json(const GenerationConfig& c) {
  return json{{"task", to_string(c.task)},
              {"n_seen_utts", c.n_seen_utts},
              {"n_unseen_utts", c.n_unseen_utts},
              {"n_speakers", c.n_speakers},
              {"voiced_lo", c.voiced_lo},
              {"voiced_hi", c.voiced_hi},
              {"silence_lo", c.silence_lo},
              {"silence_hi", c.silence_hi},
              {"strength", c.strength},
              {"include_unseen_codec", c.include_unseen_codec},
              {"sample_rate", c.sample_rate}};
}

GenerationConfig gen_from_json(const json& j) {
  check_keys(j,
             {"task", "n_seen_utts", "n_unseen_utts", "n_speakers", "voiced_lo",
              "voiced_hi", "silence_lo", "silence_hi", "strength",
              "include_unseen_codec", "sample_rate"},
             "gen");
  GenerationConfig c;
  if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
  get_or(j, "n_seen_utts", c.n_seen_utts);
  get_or(j, "n_unseen_utts", c.n_unseen_utts);
  get_or(j, "n_speakers", c.n_speakers);
  get_or(j, "voiced_lo", c.voiced_lo);
  get_or(j, "voiced_hi", c.voiced_hi);
  get_or(j, "silence_lo", c.silence_lo);
  get_or(j, "silence_hi", c.silence_hi);
  get_or(j, "strength", c.strength);
  get_or(j, "include_unseen_codec", c.include_unseen_codec);
  get_or(j, "sample_rate", c.sample_rate);
  return c;
}

json semantic_to_json(const SemanticConfig& c) {
  return json{{"sample_rate", c.sample_rate},
              {"pad_seconds", c.pad_seconds},
              {"n_fft", c.n_fft},
              {"hop", c.hop},
              {"n_mels", c.n_mels},
              {"mel_mean", c.mel_mean},
              {"mel_std", c.mel_std},
              {"d_model", c.d_model},
              {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},
              {"d_ff", c.d_ff},
              {"truncate_frames", c.truncate_frames}};
}

SemanticConfig semantic_from_json(const json& j) {
  check_keys(j,
             {"sample_rate", "pad_seconds", "n_fft", "hop", "n_mels",
              "mel_mean", "mel_std", "d_model", "n_layers", "n_heads", "d_ff",
              "truncate_frames"},
             "semantic");
  SemanticConfig c;
  get_or(j, "sample_rate", c.sample_rate);
  get_or(j, "pad_seconds", c.pad_seconds);
  get_or(j, "n_fft", c.n_fft);
  get_or(j, "hop", c.hop);
  get_or(j, "n_mels", c.n_mels);
  get_or(j, "mel_mean", c.mel_mean);
  get_or(j, "mel_std", c.mel_std);
  get_or(j, "d_model", c.d_model);
  get_or(j, "n_layers", c.n_layers);
  get_or(j, "n_heads", c.n_heads);
  get_or(j, "d_ff", c.d_ff);
  get_or(j, "truncate_frames", c.truncate_frames);
  return c;
}

json optim_to_json(const OptimConfig& c) {
  return json{{"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"weight_decay", c.weight_decay},
              {"warmup_steps", c.warmup_steps}};
}

OptimConfig optim_from_json(const json& j) {
  check_keys(j, {"lr", "beta1", "beta2", "eps", "weight_decay", "warmup_steps"},
             "optim");
  OptimConfig c;
  get_or(j, "lr", c.lr);
  get_or(j, "beta1", c.beta1);
  get_or(j, "beta2", c.beta2);
  get_or(j, "eps", c.eps);
  get_or(j, "weight_decay", c.weight_decay);
  get_or(j, "warmup_steps", c.warmup_steps);
  return c;
}

json pretrain_to_json(const SemanticPretrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"optim", optim_to_json(c.optim)},
              {"patience_perfect_epochs", c.patience_perfect_epochs},
              {"min_epochs", c.min_epochs},
              {"probe_frames", c.probe_frames},
              {"augment", c.augment}};
}

SemanticPretrainConfig pretrain_from_json(const json& j) {
  check_keys(j,
             {"epochs", "batch_size", "optim", "patience_perfect_epochs",
              "min_epochs", "probe_frames", "augment"},
             "pretrain");
  SemanticPretrainConfig c;
  get_or(j, "epochs", c.epochs);
  get_or(j, "batch_size", c.batch_size);
  if (j.contains("optim")) c.optim = optim_from_json(j.at("optim"));
  get_or(j, "patience_perfect_epochs", c.patience_perfect_epochs);
  get_or(j, "min_epochs", c.min_epochs);
  get_or(j, "probe_frames", c.probe_frames);
  get_or(j, "augment", c.augment);
  return c;
}

json coarse_to_json(const CoarseConfig& c) {
  json convs = json::array();
  for (const auto& cv : c.convs)
    convs.push_back(json{{"kernel", cv.kernel},
                         {"stride", cv.stride},
                         {"out_channels", cv.out_channels}});
  return json{{"in_samples", c.in_samples}, {"convs", convs},
              {"d_model", c.d_model},       {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},       {"d_ff", c.d_ff}};
}

CoarseConfig coarse_from_json(const json& j) {
  check_keys(j, {"in_samples", "convs", "d_model", "n_layers", "n_heads", "d_ff"},
             "coarse");
  CoarseConfig c;
  get_or(j, "in_samples", c.in_samples);
  if (j.contains("convs")) {
    c.convs.clear();
    for (const auto& cv : j.at("convs")) {
      check_keys(cv, {"kernel", "stride", "out_channels"}, "coarse.convs[]");
      ConvSpec spec;
      cv.at("kernel").get_to(spec.kernel);
      cv.at("stride").get_to(spec.stride);
      cv.at("out_channels").get_to(spec.out_channels);
      c.convs.push_back(spec);
    }
  }
  get_or(j, "d_model", c.d_model);
  get_or(j, "n_layers", c.n_layers);
  get_or(j, "n_heads", c.n_heads);
  get_or(j, "d_ff", c.d_ff);
  return c;
}

json mae_to_json(const MaeConfig& c) {
  return json{{"frames", c.frames},
              {"channels", c.channels},
              {"patch_rows", c.patch_rows},
              {"patch_cols", c.patch_cols},
              {"mask_ratio", c.mask_ratio},
              {"d_model", c.d_model},
              {"enc_layers", c.enc_layers},
              {"dec_layers", c.dec_layers},
              {"n_heads", c.n_heads},
              {"d_ff", c.d_ff},
              {"n_decoders", c.n_decoders}};
}

MaeConfig mae_from_json(const json& j) {
  check_keys(j,
             {"frames", "channels", "patch_rows", "patch_cols", "mask_ratio",
              "d_model", "enc_layers", "dec_layers", "n_heads", "d_ff",
              "n_decoders"},
             "mae");
  MaeConfig c;
  get_or(j, "frames", c.frames);
  get_or(j, "channels", c.channels);
  get_or(j, "patch_rows", c.patch_rows);
  get_or(j, "patch_cols", c.patch_cols);
  get_or(j, "mask_ratio", c.mask_ratio);
  get_or(j, "d_model", c.d_model);
  get_or(j, "enc_layers", c.enc_layers);
  get_or(j, "dec_layers", c.dec_layers);
  get_or(j, "n_heads", c.n_heads);
  get_or(j, "d_ff", c.d_ff);
  get_or(j, "n_decoders", c.n_decoders);
  return c;
}

json fusion_to_json(const FusionConfig& c) {
  return json{{"d_sem", c.d_sem},   {"d_ac", c.d_ac}, {"d_model", c.d_model},
              {"n_heads", c.n_heads}, {"d_ff", c.d_ff}, {"n_layers", c.n_layers}};
}

FusionConfig fusion_from_json(const json& j) {
  check_keys(j, {"d_sem", "d_ac", "d_model", "n_heads", "d_ff", "n_layers"},
             "fusion");
  FusionConfig c;
  get_or(j, "d_sem", c.d_sem);
  get_or(j, "d_ac", c.d_ac);
  get_or(j, "d_model", c.d_model);
  get_or(j, "n_heads", c.n_heads);
  get_or(j, "d_ff", c.d_ff);
  get_or(j, "n_layers", c.n_layers);
  return c;
}

json cls_to_json(const ClassifierConfig& c) {
  return json{{"d_in", c.d_in},
              {"attn_hidden", c.attn_hidden},
              {"mlp_hidden", c.mlp_hidden},
              {"n_classes", c.n_classes}};
}

ClassifierConfig cls_from_json(const json& j) {
  check_keys(j, {"d_in", "attn_hidden", "mlp_hidden", "n_classes"}, "cls");
  ClassifierConfig c;
  get_or(j, "d_in", c.d_in);
  get_or(j, "attn_hidden", c.attn_hidden);
  get_or(j, "mlp_hidden", c.mlp_hidden);
  get_or(j, "n_classes", c.n_classes);
  return c;
}

json model_to_json(const ModelConfig& c) {
  return json{{"task", to_string(c.task)},
              {"variant", to_string(c.variant)},
              {"coarse_init", to_string(c.coarse_init)},
              {"coarse", coarse_to_json(c.coarse)},
              {"mae", mae_to_json(c.mae)},
              {"d_readout", c.d_readout},
              {"readout_heads", c.readout_heads},
              {"fusion", fusion_to_json(c.fusion)},
              {"cls", cls_to_json(c.cls)},
              {"margin", c.margin},
              {"d_sem", c.d_sem},
              {"l_sem", c.l_sem}};
}

ModelConfig model_from_json(const json& j) {
  check_keys(j,
             {"task", "variant", "coarse_init", "coarse", "mae", "d_readout",
              "readout_heads", "fusion", "cls", "margin", "d_sem", "l_sem"},
             "model");
  ModelConfig c;
  if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
  if (j.contains("variant"))
    c.variant = parse_variant(j.at("variant").get<std::string>());
  if (j.contains("coarse_init"))
    c.coarse_init = parse_coarse_init(j.at("coarse_init").get<std::string>());
  if (j.contains("coarse")) c.coarse = coarse_from_json(j.at("coarse"));
  if (j.contains("mae")) c.mae = mae_from_json(j.at("mae"));
  get_or(j, "d_readout", c.d_readout);
  get_or(j, "readout_heads", c.readout_heads);
  if (j.contains("fusion")) c.fusion = fusion_from_json(j.at("fusion"));
  if (j.contains("cls")) c.cls = cls_from_json(j.at("cls"));
  get_or(j, "margin", c.margin);
  get_or(j, "d_sem", c.d_sem);
  get_or(j, "l_sem", c.l_sem);
  c.finalize();
  return c;
}

json train_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"optim", optim_to_json(c.optim)},
              {"augment", c.augment},
              {"seed", c.seed}};
}

TrainConfig train_from_json(const json& j) {
  check_keys(j, {"epochs", "batch_size", "optim", "augment", "seed"}, "train");
  TrainConfig c;
  get_or(j, "epochs", c.epochs);
  get_or(j, "batch_size", c.batch_size);
  if (j.contains("optim")) c.optim = optim_from_json(j.at("optim"));
  get_or(j, "augment", c.augment);
  get_or(j, "seed", c.seed);
  return c;
}

json run_to_json(const RunConfig& c) {
  return json{{"profile", c.profile},
              {"gen", gen_to_json(c.gen)},
              {"semantic", semantic_to_json(c.semantic)},
              {"pretrain", pretrain_to_json(c.pretrain)},
              {"model", model_to_json(c.model)},
              {"train", train_to_json(c.train)}};
}

RunConfig run_from_json(const json& j) {
  check_keys(j, {"profile", "gen", "semantic", "pretrain", "model", "train"},
             "run");
  RunConfig c = desk_run_config(Task::kAux);
  get_or(j, "profile", c.profile);
  if (j.contains("gen")) c.gen = gen_from_json(j.at("gen"));
  if (j.contains("semantic")) c.semantic = semantic_from_json(j.at("semantic"));
  if (j.contains("pretrain")) c.pretrain = pretrain_from_json(j.at("pretrain"));
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_from_json(j.at("train"));
  return c;
}

}  // namespace

RunConfig desk_run_config(Task task) {
  RunConfig c;
  c.profile = "desk";
  c.gen.task = task;
  c.model.task = task;
  c.model.finalize();
  return c;
}

RunConfig paper_run_config(Task task) {
  RunConfig c = desk_run_config(task);
  c.profile = "paper";
  c.semantic = semantic_paper_config();
  c.model.d_sem = c.semantic.d_model;          // 768-wide semantic stream
  c.model.l_sem = c.semantic.out_frames();     // 128 pooled frames
  c.model.mae.mask_ratio = 0.4;
  c.model.margin = 0.1;
  c.model.finalize();
  c.train.epochs = 40;
  c.train.batch_size = 12;
  c.train.optim.lr = 5e-6;
  c.train.optim.weight_decay = 1e-4;
  c.train.augment = true;  // waveform augmentation mirrors the large-scale recipe
  return c;
}

void validate_run_config(const RunConfig& cfg) {
  cfg.gen.validate();
  cfg.semantic.validate();
  cfg.model.validate();
  cfg.train.validate();
  if (cfg.model.task != cfg.gen.task)
    throw UsageError("config: model task differs from corpus task");

  if (cfg.profile == "paper") {
    if (cfg.train.batch_size != 12 || cfg.train.epochs != 40 ||
        cfg.train.optim.lr != 5e-6 || cfg.train.optim.weight_decay != 1e-4)
      throw UsageError(
          "config: profile 'paper' pins batch 12, 40 epochs, lr 5e-6, weight "
          "decay 1e-4");
    if (cfg.model.mae.mask_ratio != 0.4 || cfg.model.margin != 0.1)
      throw UsageError("config: profile 'paper' pins mask ratio 0.4, margin 0.1");
    if (cfg.semantic.d_model != 768)
      throw UsageError("config: profile 'paper' pins semantic width 768");
  } else if (cfg.profile == "desk") {
    if (cfg.train.optim.lr != 1e-3 || cfg.train.batch_size != 16 ||
        cfg.train.epochs != 30)
      throw UsageError(
          "config: profile 'desk' pins lr 1e-3, batch 16, 30 epochs; use "
          "profile 'custom' to deviate");
  } else if (cfg.profile != "custom") {
    throw UsageError("config: unknown profile '" + cfg.profile +
                     "' (expected desk|paper|custom)");
  }
}

std::string run_config_to_json(const RunConfig& cfg) {
  return run_to_json(cfg).dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    return run_from_json(j);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: bad field: ") + e.what());
  }
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write config: " + path);
  os << run_config_to_json(cfg);
  if (!os) throw IoError("failed writing config: " + path);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return run_config_from_json(ss.str());
}

std::uint64_t config_digest(const RunConfig& cfg) {
  return fnv1a64(run_config_to_json(cfg));
}

std::string model_config_to_json(const ModelConfig& cfg) {
  return model_to_json(cfg).dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return model_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw IoError(std::string("model config: bad JSON: ") + e.what());
  }
}

}  // namespace sastnet
