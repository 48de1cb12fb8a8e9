// Training-loop tests on a small generated corpus: bit-exact rerun
// determinism, loss reduction across epochs, the one-batch overfit check,
// checkpoint round trips through inference, frozen-component digests, the
// tuned coarse initialization (happy path and both failure modes), masking
// restricted to training-time forwards, augmentation determinism, and the
// epoch-history string round trip.

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sastnet/training.hpp"

using namespace sastnet;

namespace {

// One corpus shared by all cases in this file, generated once.
struct TrainingFixture {
  std::string root;
  CorpusManifest manifest;

  TrainingFixture() {
    root = (std::filesystem::temp_directory_path() / "sastnet_train_tests")
               .string();
    std::filesystem::remove_all(root);
    std::filesystem::create_directories(root);
    GenerationConfig gen;
    gen.task = Task::kAux;
    gen.n_seen_utts = 6;
    gen.n_unseen_utts = 3;
    gen.n_speakers = 2;
    manifest = build_corpus(gen, 77, root + "/corpus");
  }

  std::string dir(const std::string& name) const { return root + "/" + name; }
};

TrainingFixture& fx() {
  static TrainingFixture f;
  return f;
}

RunConfig tiny_cfg(Variant v, int epochs) {
  RunConfig cfg = desk_run_config(Task::kAux);
  cfg.profile = "custom";
  cfg.gen = fx().manifest.config;
  cfg.model.variant = v;
  cfg.model.finalize();
  cfg.train.epochs = epochs;
  cfg.train.batch_size = 8;
  cfg.train.seed = 9;
  return cfg;
}

TrainOptions out_to(const std::string& dir) {
  TrainOptions opt;
  opt.out_dir = dir;
  return opt;
}

Waveform first_test_wave() {
  const SplitView split =
      split_seen_unseen(fx().manifest, fx().manifest.config.id_threshold());
  return load_record_audio(split.test_seen, split.test_seen.records.front());
}

}  // namespace

TEST_CASE("training is bit-reproducible: same seed, same history, same bytes") {
  const RunConfig cfg = tiny_cfg(Variant::kMMae, 2);
  const TrainResult a = train_model(cfg, fx().manifest, nullptr,
                                    out_to(fx().dir("repro_a")));
  const TrainResult b = train_model(cfg, fx().manifest, nullptr,
                                    out_to(fx().dir("repro_b")));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].dev_f1 == b.history[i].dev_f1);
  }
  CHECK(file_digest(a.best_path) == file_digest(b.best_path));
  CHECK(file_digest(a.last_path) == file_digest(b.last_path));
  CHECK(file_digest(a.log_path) == file_digest(b.log_path));
  CHECK(a.steps == b.steps);
  CHECK(a.steps > 0);
}

TEST_CASE("a different seed changes the trained parameters") {
  RunConfig cfg = tiny_cfg(Variant::kMMae, 1);
  const TrainResult a =
      train_model(cfg, fx().manifest, nullptr, out_to(fx().dir("seed_a")));
  cfg.train.seed = 10;
  const TrainResult b =
      train_model(cfg, fx().manifest, nullptr, out_to(fx().dir("seed_b")));
  CHECK(file_digest(a.best_path) != file_digest(b.best_path));
}

TEST_CASE("the optimizer reduces the training loss across epochs") {
  const RunConfig cfg = tiny_cfg(Variant::kMMae, 4);
  const TrainResult r = train_model(cfg, fx().manifest, nullptr,
                                    out_to(fx().dir("lossdrop")));
  REQUIRE(r.history.size() == 4);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);

  // The JSONL log carries one line per step with the contract fields.
  std::ifstream is(r.log_path);
  REQUIRE(is.good());
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    ++lines;
    for (const char* key : {"\"step\":", "\"epoch\":", "\"loss_total\":",
                            "\"loss_cls\":", "\"loss_recon\":", "\"w_cls\":",
                            "\"w_recon\":", "\"lr\":"})
      CHECK(line.find(key) != std::string::npos);
  }
  CHECK(lines == r.steps);
}

TEST_CASE("one-batch overfit drives the loss below 10% of its start") {
  const RunConfig cfg = tiny_cfg(Variant::kMMae, 1);
  const OverfitResult r = overfit_one_batch(cfg, fx().manifest, nullptr);
  CHECK(r.passed);
  CHECK(r.steps_run <= 200);
  CHECK(r.final_loss < 0.1 * r.initial_loss);
  CHECK(std::isfinite(r.initial_loss));
}

TEST_CASE("checkpoints round-trip through inference bit-exactly") {
  const RunConfig cfg = tiny_cfg(Variant::kMMae, 1);
  const TrainResult r = train_model(cfg, fx().manifest, nullptr,
                                    out_to(fx().dir("roundtrip")));
  LoadedModel a = load_model(r.best_path);
  LoadedModel b = load_model(r.best_path);
  CHECK(a.model.digest() == b.model.digest());
  CHECK(a.meta.at("kind") == "sastnet-model");
  const ModelConfig mc = model_config_from_json(a.meta.at("model_config"));
  CHECK(mc.variant == Variant::kMMae);
  CHECK(mc.task == Task::kAux);

  const Waveform w = first_test_wave();
  const InferResult ia = infer(a.model, nullptr, w);
  const InferResult ib = infer(b.model, nullptr, w);
  CHECK(ia.label == ib.label);
  CHECK(ia.logits == ib.logits);
  CHECK(ia.logits.rows() == 1);
  CHECK(ia.logits.cols() == 3);
}

TEST_CASE("the semantic backbone stays frozen through a fusion training run") {
  SemanticBackbone backbone(SemanticConfig{}, 5);
  SemanticPretrainConfig pcfg;
  pcfg.epochs = 1;
  pcfg.min_epochs = 1;
  pretrain_toy_semantic(backbone, fx().manifest, pcfg, 5);
  const std::uint64_t digest_before = backbone.digest();

  RunConfig cfg = tiny_cfg(Variant::kSemPlusMae, 1);
  const TrainResult r = train_model(cfg, fx().manifest, &backbone,
                                    out_to(fx().dir("frozen_sem")));
  CHECK(r.semantic_digest_before == digest_before);
  CHECK(r.semantic_digest_after == digest_before);

  // This variant also freezes the coarse encoder: a fresh model with the
  // same init seed must hold identical coarse parameters to the trained one.
  LoadedModel trained = load_model(r.best_path);
  Model fresh(cfg.model, cfg.train.seed);
  CHECK(trained.model.coarse_ps().digest() == fresh.coarse_ps().digest());
  CHECK(trained.model.cls_ps().digest() != fresh.cls_ps().digest());
}

TEST_CASE("variant freeze table: which stores receive optimizer steps") {
  RunConfig sem = tiny_cfg(Variant::kSemPlusMae, 1);
  Model m_sem(sem.model, 0);
  for (ParamStore<float>* ps : m_sem.trainable_stores())
    CHECK(ps != &m_sem.coarse_ps());

  RunConfig mm = tiny_cfg(Variant::kMMae, 1);
  Model m_mm(mm.model, 0);
  bool has_coarse = false;
  for (ParamStore<float>* ps : m_mm.trainable_stores())
    has_coarse = has_coarse || ps == &m_mm.coarse_ps();
  CHECK(has_coarse);

  RunConfig base = tiny_cfg(Variant::kBaseline, 1);
  Model m_base(base.model, 0);
  CHECK(m_base.trainable_stores().size() == 2);  // coarse + classifier
}

TEST_CASE("tuned coarse init: missing path and missing file are actionable") {
  RunConfig cfg = tiny_cfg(Variant::kMMae, 1);
  cfg.model.coarse_init = CoarseInit::kTuned;

  TrainOptions opt = out_to(fx().dir("tuned_err"));
  CHECK_THROWS_AS(train_model(cfg, fx().manifest, nullptr, opt), UsageError);

  opt.tuned_coarse_path = fx().dir("does_not_exist.ckpt");
  try {
    train_model(cfg, fx().manifest, nullptr, opt);
    FAIL("expected an i/o error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("train the baseline variant first") !=
          std::string::npos);
  }
}

TEST_CASE("tuned coarse init restores the baseline encoder exactly") {
  RunConfig base = tiny_cfg(Variant::kBaseline, 1);
  const TrainResult baseline = train_baseline(base, fx().manifest,
                                              out_to(fx().dir("tuned_base")));

  RunConfig cfg = tiny_cfg(Variant::kMMae, 1);
  cfg.model.coarse_init = CoarseInit::kTuned;
  TrainOptions opt = out_to(fx().dir("tuned_run"));
  opt.tuned_coarse_path = baseline.best_path;

  Model probe(cfg.model, cfg.train.seed);
  const std::uint64_t random_coarse = probe.coarse_ps().digest();
  restore_tuned_coarse(probe, baseline.best_path);
  LoadedModel base_model = load_model(baseline.best_path);
  CHECK(probe.coarse_ps().digest() == base_model.model.coarse_ps().digest());
  CHECK(probe.coarse_ps().digest() != random_coarse);

  // End to end: training with the tuned start runs and differs from random.
  const TrainResult tuned = train_model(cfg, fx().manifest, nullptr, opt);
  const TrainResult rnd = train_model(tiny_cfg(Variant::kMMae, 1),
                                      fx().manifest, nullptr,
                                      out_to(fx().dir("tuned_ctrl")));
  CHECK(file_digest(tuned.best_path) != file_digest(rnd.best_path));
}

TEST_CASE("mask plans are a training-time construct") {
  // The plain variant has no autoencoder, so a plan is a contract violation.
  RunConfig base = tiny_cfg(Variant::kBaseline, 1);
  Model model(base.model, 3);
  const Waveform w = first_test_wave();
  const Index n = base.model.coarse.in_samples;
  const Matf block = wave_block(w, n, centered_block_offset(w, n));
  const MaskPlan plan = plan_mask(base.model.mae.grid_rows(),
                                  base.model.mae.grid_cols(), 0.4, Rng(1));
  Tape<float> t;
  Binding<float> bind;
  CHECK_THROWS_AS(model.forward(t, bind, block, nullptr, &plan, -1),
                  ContractError);

  // With an autoencoder, masked and mask-free forwards see different inputs
  // and must produce different logits; inference never passes a plan.
  RunConfig mm = tiny_cfg(Variant::kMMae, 1);
  Model mmae(mm.model, 3);
  Tape<float> t1, t2;
  Binding<float> b1, b2;
  const Matf masked = t1.val(
      mmae.forward(t1, b1, block, nullptr, &plan, -1).logits);
  const Matf plain = t2.val(
      mmae.forward(t2, b2, block, nullptr, nullptr, -1).logits);
  CHECK(masked != plain);
}

TEST_CASE("augmentation is seed-deterministic and shape-preserving") {
  const Waveform w = first_test_wave();
  const Waveform a = augment_waveform(w, Rng(123));
  const Waveform b = augment_waveform(w, Rng(123));
  const Waveform c = augment_waveform(w, Rng(124));
  REQUIRE(a.size() == w.size());
  CHECK(a.sample_rate == w.sample_rate);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  CHECK(a.samples != w.samples);
  // The filter is near-identity and the noise floor is at least 25 dB down,
  // so the energy stays within a factor of two.
  const float rw = std::sqrt(w.samples.squaredNorm() / w.size());
  const float ra = std::sqrt(a.samples.squaredNorm() / a.size());
  CHECK(ra > 0.5f * rw);
  CHECK(ra < 2.0f * rw);
}

TEST_CASE("epoch history survives its string round trip") {
  std::vector<EpochStat> h;
  h.push_back({0, 2.25, 0.5});
  h.push_back({1, 1.0625, 0.75});
  const std::vector<EpochStat> back =
      detail::history_from_string(detail::history_to_string(h));
  REQUIRE(back.size() == 2);
  CHECK(back[0].epoch == 0);
  CHECK(back[0].train_loss == 2.25);
  CHECK(back[1].dev_f1 == 0.75);
}

TEST_CASE("training rejects a manifest whose splits are empty") {
  GenerationConfig gen;
  gen.task = Task::kAux;
  gen.n_seen_utts = 2;
  gen.n_unseen_utts = 0;
  gen.n_speakers = 1;
  const CorpusManifest tiny =
      build_corpus(gen, 4, fx().dir("tiny_corpus"));
  CorpusManifest broken = tiny;
  broken.records.clear();
  RunConfig cfg = tiny_cfg(Variant::kBaseline, 1);
  cfg.gen = gen;
  CHECK_THROWS_AS(
      train_model(cfg, broken, nullptr, out_to(fx().dir("empty_run"))),
      ContractError);
}
