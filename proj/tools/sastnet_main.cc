// tools/sastnet_main.cc
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
// The sastnet command line: corpus generation, semantic pretraining, model
// training, evaluation grids, ablation matrices, attention export, and plot
// rendering — one binary, one --seed, all randomness derived from it.
//
// Exit codes: 0 success, 2 usage error, 3 contract/validation failure,
// 4 I/O error. Environment overrides: SASTNET_OUT_ROOT prefixes relative
// output directories; SASTNET_THREADS caps linear-algebra threads. Every
// artifact directory receives exactly one run_manifest.json recording the
// command, config digest, seed, tool version, inputs with digests, outputs,
// and wall-clock time.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sastnet/evaluation.hpp"
#include "sastnet/plot.hpp"
#include "sastnet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sastnet;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

std::string resolve_out(const std::string& dir) {
  if (dir.empty()) throw UsageError("output directory must not be empty");
  const char* root = std::getenv("SASTNET_OUT_ROOT");
  if (root && *root && fs::path(dir).is_relative())
    return (fs::path(root) / dir).string();
  return dir;
}

void prepare_out_dir(const std::string& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir) && fs::is_directory(dir) && !fs::is_empty(dir, ec) &&
      !force)
    throw UsageError("output directory '" + dir +
                     "' is not empty; pass --force to write into it");
  fs::create_directories(dir);
}

struct RunInfo {
  std::string command;
  std::uint64_t config_digest = 0;
  unsigned long long seed = 0;
  std::map<std::string, std::uint64_t> inputs;  // path -> content digest
  std::vector<std::string> outputs;             // relative to the directory
};

void write_run_manifest(const std::string& dir, const RunInfo& info,
                        double wall_seconds) {
  json inputs = json::object();
  for (const auto& [path, digest] : info.inputs)
    inputs[path] = std::to_string(digest);
  const json j{{"command", info.command},
               {"config_digest", std::to_string(info.config_digest)},
               {"seed", info.seed},
               {"tool_version", kToolVersion},
               {"inputs", std::move(inputs)},
               {"outputs", info.outputs},
               {"wall_clock_seconds", wall_seconds}};
  std::ofstream os(dir + "/run_manifest.json", std::ios::trunc);
  if (!os) throw IoError("cannot write run manifest in " + dir);
  os << j.dump(2) << "\n";
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

CorpusManifest load_corpus_dir(const std::string& dir) {
  const std::string path = (fs::path(dir) / "manifest.jsonl").string();
  if (!fs::exists(path))
    throw IoError("no corpus manifest at " + path +
                  "; run gen-corpus first");
  return load_manifest(path);
}

SemanticBackbone require_semantic(const std::string& path,
                                  const ModelConfig& model) {
  if (path.empty())
    throw UsageError("variant '" + std::string(to_string(model.variant)) +
                     "' needs --semantic SEMANTIC_CKPT; run "
                     "pretrain-semantic first");
  return load_semantic(path);
}

// ---------------------------------------------------------------------------
// Per-command option bags
// ---------------------------------------------------------------------------

struct CommonTrainArgs {
  std::string corpus;
  std::string out;
  std::string profile = "desk";
  std::string config_path;
  std::string semantic_path;
  unsigned long long seed = 0;
  bool force = false;
  // Custom-profile knobs; the named profiles pin these and reject deviation.
  int epochs = -1;
  int batch = -1;
  double lr = -1.0;
  double mask_ratio = -1.0;
  double margin = -1.0;
  bool augment = false;
  bool no_augment = false;
};

void add_train_knobs(CLI::App* cmd, CommonTrainArgs& a) {
  cmd->add_option("--corpus", a.corpus, "corpus directory (from gen-corpus)")
      ->required();
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--profile", a.profile, "desk | paper | custom");
  cmd->add_option("--config", a.config_path, "run-config JSON (overrides profile)");
  cmd->add_option("--semantic", a.semantic_path, "pretrained semantic checkpoint");
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_flag("--force", a.force, "write into a non-empty directory");
  cmd->add_option("--epochs", a.epochs, "epochs (custom profile)");
  cmd->add_option("--batch", a.batch, "batch size (custom profile)");
  cmd->add_option("--lr", a.lr, "learning rate (custom profile)");
  cmd->add_option("--mask-ratio", a.mask_ratio, "mask ratio (custom profile)");
  cmd->add_option("--margin", a.margin, "reconstruction margin (custom profile)");
  cmd->add_flag("--augment", a.augment, "waveform augmentation on");
  cmd->add_flag("--no-augment", a.no_augment, "waveform augmentation off");
}

RunConfig resolve_run_config(const CommonTrainArgs& a, const CorpusManifest& corpus) {
  const Task task = corpus.config.task;
  RunConfig cfg;
  if (!a.config_path.empty()) {
    cfg = load_run_config(a.config_path);
    if (cfg.model.task != task)
      throw ContractError("config file targets task '" +
                          to_string(cfg.model.task) + "' but the corpus holds '" +
                          to_string(task) + "'");
  } else if (a.profile == "paper") {
    cfg = paper_run_config(task);
  } else {
    cfg = desk_run_config(task);
    cfg.profile = a.profile;  // "desk" or "custom"
  }
  cfg.gen = corpus.config;
  cfg.train.seed = a.seed;
  if (a.epochs > 0) cfg.train.epochs = a.epochs;
  if (a.batch > 0) cfg.train.batch_size = a.batch;
  if (a.lr > 0) cfg.train.optim.lr = a.lr;
  if (a.mask_ratio >= 0) cfg.model.mae.mask_ratio = a.mask_ratio;
  if (a.margin >= 0) cfg.model.margin = a.margin;
  if (a.augment) cfg.train.augment = true;
  if (a.no_augment) cfg.train.augment = false;
  return cfg;
}

void echo_config(const RunConfig& cfg) {
  std::cout << "profile=" << cfg.profile << " task=" << to_string(cfg.model.task)
            << " variant=" << to_string(cfg.model.variant)
            << " coarse_init=" << to_string(cfg.model.coarse_init)
            << " lr=" << cfg.train.optim.lr
            << " batch=" << cfg.train.batch_size
            << " epochs=" << cfg.train.epochs
            << " weight_decay=" << cfg.train.optim.weight_decay
            << " mask_ratio=" << cfg.model.mae.mask_ratio
            << " margin=" << cfg.model.margin
            << " augment=" << (cfg.train.augment ? "on" : "off")
            << " seed=" << cfg.train.seed << "\n";
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_gen_corpus(const std::string& task_name, unsigned long long seed,
                   const std::string& out_arg, bool force, int seen_utts,
                   int unseen_utts, int speakers, bool no_unseen_codec) {
  Stopwatch watch;
  const std::string out = resolve_out(out_arg);
  prepare_out_dir(out, force);

  GenerationConfig gen;
  gen.task = parse_task(task_name);
  if (seen_utts > 0) gen.n_seen_utts = seen_utts;
  if (unseen_utts >= 0) gen.n_unseen_utts = unseen_utts;
  if (speakers > 0) gen.n_speakers = speakers;
  if (no_unseen_codec) gen.include_unseen_codec = false;
  gen.validate();

  const CorpusManifest manifest = build_corpus(gen, seed, out);

  std::map<int, int> histogram;
  for (const auto& r : manifest.records)
    ++histogram[r.label.index_for(gen.task)];
  std::cout << "corpus: " << manifest.records.size() << " records at " << out
            << "\n";
  for (const auto& [cls, count] : histogram)
    std::cout << "  class " << cls << " (" << class_name(gen.task, cls)
              << "): " << count << "\n";

  RunInfo info;
  info.command = "gen-corpus";
  info.seed = seed;
  RunConfig digest_cfg = desk_run_config(gen.task);
  digest_cfg.gen = gen;
  info.config_digest = config_digest(digest_cfg);
  info.outputs = {"manifest.jsonl", "wav/"};
  write_run_manifest(out, info, watch.seconds());
  return 0;
}

int cmd_pretrain_semantic(const std::string& corpus_dir,
                          unsigned long long seed, const std::string& out_arg,
                          bool force, int epochs) {
  Stopwatch watch;
  const std::string out = resolve_out(out_arg);
  prepare_out_dir(out, force);
  const CorpusManifest manifest = load_corpus_dir(corpus_dir);

  RunConfig cfg = desk_run_config(manifest.config.task);
  if (epochs > 0) cfg.pretrain.epochs = epochs;

  SemanticBackbone backbone(cfg.semantic, seed);
  const SemanticPretrainResult result =
      pretrain_toy_semantic(backbone, manifest, cfg.pretrain, seed);
  std::cout << "semantic pretraining: " << result.epochs_run << " epochs"
            << ", train-id accuracy " << result.probe_train_accuracy
            << ", scalar-twin accuracy " << result.probe_scalar_twin_accuracy
            << " (" << result.n_scalar_twins << " twins)"
            << ", all-codec accuracy " << result.probe_codec_accuracy << "\n";

  const std::string ckpt = out + "/semantic.ckpt";
  std::map<std::string, std::string> meta;
  meta["probe_train_accuracy"] = std::to_string(result.probe_train_accuracy);
  meta["probe_scalar_twin_accuracy"] =
      std::to_string(result.probe_scalar_twin_accuracy);
  meta["seed"] = std::to_string(seed);
  save_semantic(backbone, ckpt, meta);
  std::cout << "saved " << ckpt << " (digest " << backbone.digest() << ")\n";

  RunInfo info;
  info.command = "pretrain-semantic";
  info.seed = seed;
  info.config_digest = config_digest(cfg);
  info.inputs[corpus_dir + "/manifest.jsonl"] =
      file_digest((fs::path(corpus_dir) / "manifest.jsonl").string());
  info.outputs = {"semantic.ckpt"};
  write_run_manifest(out, info, watch.seconds());
  return 0;
}

int cmd_train(CommonTrainArgs a, const std::string& variant_name,
              const std::string& coarse_init_name,
              const std::string& coarse_from, const std::string& resume,
              const std::string& task_name) {
  Stopwatch watch;
  a.out = resolve_out(a.out);
  prepare_out_dir(a.out, a.force || !resume.empty());
  const CorpusManifest manifest = load_corpus_dir(a.corpus);
  if (!task_name.empty() && parse_task(task_name) != manifest.config.task)
    throw ContractError("requested task '" + task_name +
                        "' but the corpus holds '" +
                        to_string(manifest.config.task) + "'");

  RunConfig cfg = resolve_run_config(a, manifest);
  cfg.model.variant = parse_variant(variant_name);
  cfg.model.coarse_init = parse_coarse_init(coarse_init_name);
  cfg.model.finalize();
  validate_run_config(cfg);
  echo_config(cfg);

  SemanticBackbone semantic = cfg.model.uses_semantic()
                                  ? require_semantic(a.semantic_path, cfg.model)
                                  : SemanticBackbone(cfg.semantic, 0);

  TrainOptions opt;
  opt.out_dir = a.out;
  opt.tuned_coarse_path = coarse_from;
  opt.resume_path = resume;
  const TrainResult result = train_model(
      cfg, manifest, cfg.model.uses_semantic() ? &semantic : nullptr, opt);

  save_run_config(cfg, a.out + "/train_config.json");
  std::cout << "trained " << result.steps << " steps; best dev macro-F1 "
            << result.best_dev_f1 << " at epoch " << result.best_epoch << "\n"
            << "checkpoints: " << result.best_path << ", " << result.last_path
            << "\n";

  RunInfo info;
  info.command = "train";
  info.seed = a.seed;
  info.config_digest = config_digest(cfg);
  info.inputs[a.corpus + "/manifest.jsonl"] =
      file_digest((fs::path(a.corpus) / "manifest.jsonl").string());
  if (cfg.model.uses_semantic())
    info.inputs[a.semantic_path] = file_digest(a.semantic_path);
  if (!coarse_from.empty()) info.inputs[coarse_from] = file_digest(coarse_from);
  info.outputs = {"best.ckpt", "last.ckpt", "train_log.jsonl",
                  "train_config.json"};
  write_run_manifest(a.out, info, watch.seconds());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& corpus_dir,
             const std::string& out_arg, bool grid, bool without_silence,
             const std::string& content, const std::string& semantic_path,
             bool rank, bool force) {
  Stopwatch watch;
  const std::string out = resolve_out(out_arg);
  prepare_out_dir(out, force);
  const CorpusManifest manifest = load_corpus_dir(corpus_dir);
  LoadedModel loaded = load_model(checkpoint);
  if (loaded.model.config().task != manifest.config.task)
    throw ContractError("task mismatch: checkpoint was trained for '" +
                        to_string(loaded.model.config().task) +
                        "' but the corpus holds '" +
                        to_string(manifest.config.task) + "'");
  SemanticBackbone semantic =
      loaded.model.config().uses_semantic()
          ? require_semantic(semantic_path, loaded.model.config())
          : SemanticBackbone(SemanticConfig{}, 0);
  const SemanticBackbone* sem =
      loaded.model.config().uses_semantic() ? &semantic : nullptr;

  RunInfo info;
  info.command = "eval";
  info.inputs[checkpoint] = file_digest(checkpoint);
  info.inputs[corpus_dir + "/manifest.jsonl"] =
      file_digest((fs::path(corpus_dir) / "manifest.jsonl").string());

  if (grid) {
    const ConditionGrid g = run_condition_grid(loaded.model, sem, manifest);
    save_condition_grid(g, out + "/grid.json");
    std::ofstream table(out + "/grid.txt", std::ios::trunc);
    table << render_condition_grid(g);
    std::cout << render_condition_grid(g);
    info.outputs = {"grid.json", "grid.txt"};
  } else {
    if (content != "seen" && content != "unseen")
      throw UsageError("--content must be seen or unseen");
    const SplitView split =
        split_seen_unseen(manifest, manifest.config.id_threshold());
    const CorpusManifest& part =
        content == "seen" ? split.test_seen : split.test_unseen;
    std::vector<int> preds;
    const EvalReport report =
        evaluate(loaded.model, sem, part, without_silence,
                 {{"silence", without_silence ? "without" : "with"},
                  {"content", content}},
                 &preds);
    save_eval_report(report, out + "/report.json");
    std::cout << "macro-F1 " << report.macro_f1 << " over " << report.n_items
              << " items (" << content << " content, "
              << (without_silence ? "without" : "with") << " silence)\n";
    info.outputs = {"report.json"};

    const std::vector<SilenceGroup> groups = silence_groups_by_source(
        part.records, preds, loaded.model.config().task);
    if (groups.size() >= 3) {
      bool degenerate = false;
      try {
        const CorrelationResult corr = silence_f1_correlation(groups, rank);
        std::ofstream os(out + "/correlation.json", std::ios::trunc);
        os << correlation_to_json(corr);
        std::cout << corr.method << " silence/F1 correlation "
                  << corr.coefficient << " over " << corr.n_points
                  << " sources\n";
        info.outputs.push_back("correlation.json");
      } catch (const ContractError&) {
        degenerate = true;  // constant silence or constant F1 across sources
      }
      if (degenerate)
        std::cout << "silence/F1 correlation degenerate (constant coordinate)\n";
    }
  }
  write_run_manifest(out, info, watch.seconds());
  return 0;
}

int cmd_ablate(CommonTrainArgs a, const std::string& variants_csv) {
  Stopwatch watch;
  a.out = resolve_out(a.out);
  prepare_out_dir(a.out, a.force);
  const CorpusManifest manifest = load_corpus_dir(a.corpus);

  std::vector<Variant> variants;
  std::stringstream ss(variants_csv);
  std::string name;
  while (std::getline(ss, name, ',')) variants.push_back(parse_variant(name));

  RunConfig cfg = resolve_run_config(a, manifest);
  cfg.model.finalize();
  validate_run_config(cfg);

  bool needs_semantic = false;
  for (const Variant v : variants) {
    RunConfig probe = cfg;
    probe.model.variant = v;
    needs_semantic = needs_semantic || probe.model.uses_semantic();
  }
  SemanticBackbone semantic =
      needs_semantic ? require_semantic(a.semantic_path, cfg.model)
                     : SemanticBackbone(cfg.semantic, 0);

  const std::vector<AblationRow> rows = run_ablation_matrix(
      cfg, manifest, needs_semantic ? &semantic : nullptr, variants, a.out);
  std::cout << render_ablation_table(rows);

  RunInfo info;
  info.command = "ablate";
  info.seed = a.seed;
  info.config_digest = config_digest(cfg);
  info.inputs[a.corpus + "/manifest.jsonl"] =
      file_digest((fs::path(a.corpus) / "manifest.jsonl").string());
  info.outputs = {"ablation.json", "ablation.txt"};
  for (const auto& row : rows)
    info.outputs.push_back(std::string(to_string(row.variant)) + "/");
  write_run_manifest(a.out, info, watch.seconds());
  return 0;
}

int cmd_attn(const std::string& checkpoint, const std::string& corpus_dir,
             const std::string& out_arg, int record_index,
             const std::string& semantic_path, bool force) {
  Stopwatch watch;
  const std::string out = resolve_out(out_arg);
  prepare_out_dir(out, force);
  const CorpusManifest manifest = load_corpus_dir(corpus_dir);
  LoadedModel loaded = load_model(checkpoint);
  const ModelConfig& mc = loaded.model.config();
  if (!mc.uses_fusion())
    throw ContractError("variant '" + std::string(to_string(mc.variant)) +
                        "' has no fusion stack to export attention from");
  if (record_index < 0 ||
      record_index >= static_cast<int>(manifest.records.size()))
    throw UsageError("--record index out of range (corpus has " +
                     std::to_string(manifest.records.size()) + " records)");
  const UtteranceRecord& rec =
      manifest.records[static_cast<std::size_t>(record_index)];
  SemanticBackbone semantic = mc.uses_semantic()
                                  ? require_semantic(semantic_path, mc)
                                  : SemanticBackbone(SemanticConfig{}, 0);

  FusionCapture cap;
  const Waveform w = load_record_audio(manifest, rec);
  const InferResult res =
      infer(loaded.model, mc.uses_semantic() ? &semantic : nullptr, w, &cap);

  const std::string utt = "utt" + std::to_string(rec.utt_id) + "-take" +
                          std::to_string(rec.take) + "-" + source_key(rec);
  const int last = mc.fusion.n_layers - 1;
  RunInfo info;
  info.command = "attn";
  info.inputs[checkpoint] = file_digest(checkpoint);
  for (const FusionStage stage : {FusionStage::kSemAttendsAc,
                                  FusionStage::kAcAttendsSem,
                                  FusionStage::kFusion}) {
    const AttentionMap map = export_attention(cap, stage, last);
    const std::string base = std::string(to_string(stage)) + ".bin";
    save_attention_map(out + "/" + base, map, utt);
    info.outputs.push_back(base);
    info.outputs.push_back(base + ".txt");
  }
  std::cout << "exported 3 attention maps (last layer) for " << utt
            << "; predicted class " << res.label << "\n";
  write_run_manifest(out, info, watch.seconds());
  return 0;
}

int cmd_plot(const std::string& report_path, const std::string& attention_path,
             const std::string& out_arg, bool force) {
  Stopwatch watch;
  if (report_path.empty() && attention_path.empty())
    throw UsageError("plot: pass --report and/or --attention");
  const std::string out = resolve_out(out_arg);
  prepare_out_dir(out, force);
  RunInfo info;
  info.command = "plot";
  if (!report_path.empty()) {
    const EvalReport report = load_eval_report(report_path);
    plot_confusion(report, out + "/confusion.ppm");
    info.inputs[report_path] = file_digest(report_path);
    info.outputs.push_back("confusion.ppm");
    std::cout << "wrote " << out << "/confusion.ppm\n";
  }
  if (!attention_path.empty()) {
    const LoadedAttentionMap loaded = load_attention_map(attention_path);
    const std::string name = std::string(to_string(loaded.map.stage)) +
                             "_attention.ppm";
    plot_attention(loaded.map, out + "/" + name);
    info.inputs[attention_path] = file_digest(attention_path);
    info.outputs.push_back(name);
    std::cout << "wrote " << out << "/" << name << "\n";
  }
  write_run_manifest(out, info, watch.seconds());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("SASTNET_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"codec-fingerprint source tracing toolkit"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "synthesize a labeled corpus");
  std::string gen_task = "aux", gen_out;
  unsigned long long gen_seed = 0;
  bool gen_force = false, gen_no_unseen_codec = false;
  int gen_seen = -1, gen_unseen = -1, gen_speakers = -1;
  gen->add_option("--task", gen_task, "vq | aux | dec | bin");
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--out", gen_out, "corpus directory")->required();
  gen->add_flag("--force", gen_force, "write into a non-empty directory");
  gen->add_option("--seen-utts", gen_seen, "seen utterance count");
  gen->add_option("--unseen-utts", gen_unseen, "unseen utterance count");
  gen->add_option("--speakers", gen_speakers, "speaker count");
  gen->add_flag("--no-unseen-codec", gen_no_unseen_codec,
                "skip the held-out codec profiles");

  // pretrain-semantic
  auto* pre = app.add_subcommand("pretrain-semantic",
                                 "pretrain the frozen semantic backbone");
  std::string pre_corpus, pre_out;
  unsigned long long pre_seed = 0;
  bool pre_force = false;
  int pre_epochs = -1;
  pre->add_option("--corpus", pre_corpus, "corpus directory")->required();
  pre->add_option("--seed", pre_seed, "master seed");
  pre->add_option("--out", pre_out, "output directory")->required();
  pre->add_flag("--force", pre_force, "write into a non-empty directory");
  pre->add_option("--epochs", pre_epochs, "override pretraining epochs");

  // train
  auto* train = app.add_subcommand("train", "train one model variant");
  CommonTrainArgs train_args;
  std::string train_variant = "sastnet", train_coarse_init = "random";
  std::string train_coarse_from, train_resume, train_task;
  add_train_knobs(train, train_args);
  train->add_option("--task", train_task, "must match the corpus task");
  train->add_option("--variant", train_variant,
                    "baseline | s_mae | m_mae | sem_mae | coarse_mae | sastnet");
  train->add_option("--coarse-init", train_coarse_init, "random | tuned");
  train->add_option("--coarse-from", train_coarse_from,
                    "baseline checkpoint for --coarse-init tuned");
  train->add_option("--resume", train_resume, "checkpoint to resume from");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_corpus, eval_out, eval_content = "seen";
  std::string eval_semantic;
  bool eval_grid = false, eval_wo = false, eval_rank = false,
       eval_force = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "corpus directory")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_flag("--grid", eval_grid,
                     "full condition grid instead of a single cell");
  eval_cmd->add_flag("--without-silence", eval_wo,
                     "trim silence before inference");
  eval_cmd->add_option("--content", eval_content, "seen | unseen");
  eval_cmd->add_option("--semantic", eval_semantic,
                       "semantic checkpoint (semantic variants)");
  eval_cmd->add_flag("--rank-correlation", eval_rank,
                     "rank correlation instead of product-moment");
  eval_cmd->add_flag("--force", eval_force, "write into a non-empty directory");

  // ablate
  auto* ablate = app.add_subcommand("ablate",
                                    "train/evaluate an encoder-variant matrix");
  CommonTrainArgs ablate_args;
  std::string ablate_variants =
      "baseline,s_mae,m_mae,sem_mae,coarse_mae,sastnet";
  add_train_knobs(ablate, ablate_args);
  ablate->add_option("--variants", ablate_variants,
                     "comma-separated variant list");

  // attn
  auto* attn = app.add_subcommand("attn", "export fusion attention maps");
  std::string attn_ckpt, attn_corpus, attn_out, attn_semantic;
  int attn_record = 0;
  bool attn_force = false;
  attn->add_option("--checkpoint", attn_ckpt, "model checkpoint")->required();
  attn->add_option("--corpus", attn_corpus, "corpus directory")->required();
  attn->add_option("--out", attn_out, "output directory")->required();
  attn->add_option("--record", attn_record, "record index in the manifest");
  attn->add_option("--semantic", attn_semantic,
                   "semantic checkpoint (semantic variants)");
  attn->add_flag("--force", attn_force, "write into a non-empty directory");

  // plot
  auto* plot = app.add_subcommand("plot", "render reports and maps as images");
  std::string plot_report, plot_attention_path, plot_out;
  bool plot_force = false;
  plot->add_option("--report", plot_report, "evaluation report JSON");
  plot->add_option("--attention", plot_attention_path,
                   "attention map container");
  plot->add_option("--out", plot_out, "output directory")->required();
  plot->add_flag("--force", plot_force, "write into a non-empty directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(gen))
      return cmd_gen_corpus(gen_task, gen_seed, gen_out, gen_force, gen_seen,
                            gen_unseen, gen_speakers, gen_no_unseen_codec);
    if (app.got_subcommand(pre))
      return cmd_pretrain_semantic(pre_corpus, pre_seed, pre_out, pre_force,
                                   pre_epochs);
    if (app.got_subcommand(train))
      return cmd_train(train_args, train_variant, train_coarse_init,
                       train_coarse_from, train_resume, train_task);
    if (app.got_subcommand(eval_cmd))
      return cmd_eval(eval_ckpt, eval_corpus, resolve_out(eval_out), eval_grid,
                      eval_wo, eval_content, eval_semantic, eval_rank,
                      eval_force);
    if (app.got_subcommand(ablate))
      return cmd_ablate(ablate_args, ablate_variants);
    if (app.got_subcommand(attn))
      return cmd_attn(attn_ckpt, attn_corpus, attn_out, attn_record,
                      attn_semantic, attn_force);
    if (app.got_subcommand(plot))
      return cmd_plot(plot_report, plot_attention_path, plot_out, plot_force);
    throw UsageError("no command selected");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
