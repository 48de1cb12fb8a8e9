// src/corpus.cc
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

#include "sastnet/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <limits>

namespace sastnet {

namespace fs = std::filesystem;

std::vector<CodecProfile> seen_profiles(double strength) {
  // Half of the 3x2x2 profile grid, chosen so every axis value appears on
  // both sides of the seen/held-out boundary (only combinations are novel).
  return {
      {VqKind::kMultiCodebook, AuxKind::kSemanticDistill, DecKind::kTime, strength},
      {VqKind::kMultiCodebook, AuxKind::kDisentangle, DecKind::kFreq, strength},
      {VqKind::kSingleCodebook, AuxKind::kSemanticDistill, DecKind::kFreq, strength},
      {VqKind::kSingleCodebook, AuxKind::kDisentangle, DecKind::kTime, strength},
      {VqKind::kScalar, AuxKind::kSemanticDistill, DecKind::kTime, strength},
      {VqKind::kScalar, AuxKind::kDisentangle, DecKind::kFreq, strength},
  };
}

std::vector<CodecProfile> held_out_profiles(double strength) {
  return {
      {VqKind::kMultiCodebook, AuxKind::kSemanticDistill, DecKind::kFreq, strength},
      {VqKind::kMultiCodebook, AuxKind::kDisentangle, DecKind::kTime, strength},
      {VqKind::kSingleCodebook, AuxKind::kSemanticDistill, DecKind::kTime, strength},
      {VqKind::kSingleCodebook, AuxKind::kDisentangle, DecKind::kFreq, strength},
      {VqKind::kScalar, AuxKind::kSemanticDistill, DecKind::kFreq, strength},
      {VqKind::kScalar, AuxKind::kDisentangle, DecKind::kTime, strength},
  };
}

namespace {

std::vector<CodecProfile> filter_vq(const std::vector<CodecProfile>& pool, VqKind v) {
  std::vector<CodecProfile> out;
  for (const auto& p : pool)
    if (p.vq == v) out.push_back(p);
  return out;
}

std::vector<CodecProfile> filter_aux(const std::vector<CodecProfile>& pool, AuxKind a) {
  std::vector<CodecProfile> out;
  for (const auto& p : pool)
    if (p.aux == a) out.push_back(p);
  return out;
}

std::vector<CodecProfile> filter_dec(const std::vector<CodecProfile>& pool, DecKind d) {
  std::vector<CodecProfile> out;
  for (const auto& p : pool)
    if (p.dec == d) out.push_back(p);
  return out;
}

// One spoof profile per task class, drawn from `pool`; the unconstrained
// axes rotate with the utterance id so their exposure stays even.
std::vector<CodecProfile> task_spoof_profiles(Task task,
                                              const std::vector<CodecProfile>& pool,
                                              long long utt_id) {
  std::vector<CodecProfile> out;
  const auto rotate = [utt_id](const std::vector<CodecProfile>& cand, int salt) {
    if (cand.empty()) throw ContractError("task_spoof_profiles: empty candidate set");
    const auto n = static_cast<long long>(cand.size());
    return cand[static_cast<std::size_t>(((utt_id + salt) % n + n) % n)];
  };
  switch (task) {
    case Task::kVq: {
      const VqKind kinds[] = {VqKind::kMultiCodebook, VqKind::kSingleCodebook,
                              VqKind::kScalar};
      for (int k = 0; k < 3; ++k) out.push_back(rotate(filter_vq(pool, kinds[k]), k));
      break;
    }
    case Task::kAux: {
      const AuxKind kinds[] = {AuxKind::kSemanticDistill, AuxKind::kDisentangle};
      for (int k = 0; k < 2; ++k) out.push_back(rotate(filter_aux(pool, kinds[k]), k));
      break;
    }
    case Task::kDec: {
      const DecKind kinds[] = {DecKind::kTime, DecKind::kFreq};
      for (int k = 0; k < 2; ++k) out.push_back(rotate(filter_dec(pool, kinds[k]), k));
      break;
    }
    case Task::kBin:
      out.push_back(rotate(pool, 0));
      break;
  }
  return out;
}

std::string profile_slug(const CodecProfile& p) {
  return std::string(to_string(p.vq)) + "-" + to_string(p.aux) + "-" +
         to_string(p.dec);
}

std::string record_filename(long long utt_id, int take, const std::string& tag) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "utt%04lld_t%d_", utt_id, take);
  return std::string("wav/") + buf + tag + ".wav";
}

int speaker_of(const GenerationConfig& cfg, long long utt_id) {
  return static_cast<int>(utt_id % cfg.n_speakers);
}

}  // namespace

Waveform synth_record(const GenerationConfig& cfg, unsigned long long seed,
                      long long utt_id, int take, double* head_out,
                      double* tail_out, double* voiced_out) {
  const Rng master(seed);
  const Rng utt_rng = master.derive("utt", {utt_id});
  const Rng speaker_rng = master.derive("speaker", {speaker_of(cfg, utt_id)});
  Rng dur_rng = master.derive("duration", {utt_id});
  const double voiced = dur_rng.uniform(cfg.voiced_lo, cfg.voiced_hi);
  Rng sil_rng = master.derive("silence", {utt_id, take});
  const double head = sil_rng.uniform(cfg.silence_lo, cfg.silence_hi);
  const double tail = sil_rng.uniform(cfg.silence_lo, cfg.silence_hi);

  UtteranceSpec spec;
  spec.utt_id = utt_id;
  spec.speaker_id = speaker_of(cfg, utt_id);
  spec.voiced_seconds = voiced;
  spec.head_silence_seconds = head;
  spec.tail_silence_seconds = tail;
  SynthConfig scfg;
  scfg.sample_rate = cfg.sample_rate;

  if (head_out) *head_out = head;
  if (tail_out) *tail_out = tail;
  if (voiced_out) *voiced_out = voiced;
  return synth_utterance(spec, scfg, utt_rng, speaker_rng);
}

CorpusManifest build_corpus(const GenerationConfig& cfg,
                            unsigned long long seed, const std::string& root) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(fs::path(root) / "wav", ec);
  if (ec) throw IoError("build_corpus: cannot create '" + root + "': " + ec.message());

  CorpusManifest m;
  m.config = cfg;
  m.seed = seed;
  m.root = root;

  const auto seen = seen_profiles(cfg.strength);
  const auto held_out = held_out_profiles(cfg.strength);
  const long long n_total = cfg.n_seen_utts + cfg.n_unseen_utts;

  for (long long utt = 1; utt <= n_total; ++utt) {
    const bool is_seen = utt <= cfg.id_threshold();
    const int n_takes = is_seen ? 2 : 1;
    for (int take = 0; take < n_takes; ++take) {
      const std::string split =
          is_seen ? (take == 0 ? "train" : "test_seen") : "test_unseen";
      double head = 0, tail = 0, voiced = 0;
      const Waveform bona = synth_record(cfg, seed, utt, take, &head, &tail, &voiced);

      UtteranceRecord real;
      real.utt_id = utt;
      real.speaker_id = speaker_of(cfg, utt);
      real.take = take;
      real.label = TaxonomyLabel::bonafide();
      real.silence_head = head;
      real.silence_tail = tail;
      real.voiced_seconds = voiced;
      real.path = record_filename(utt, take, "real");
      real.split = split;
      write_wav(root + "/" + real.path, bona);
      m.records.push_back(real);

      auto emit_spoofs = [&](const std::vector<CodecProfile>& profiles,
                             bool held_out_flag, const std::string& spoof_split) {
        for (const CodecProfile& p : profiles) {
          const Rng rec_rng =
              Rng(seed).derive("codec-record:" + p.id(), {utt, take});
          const Waveform sp = apply_codec_sim(bona, p, seed, rec_rng);
          UtteranceRecord r = real;
          r.label = TaxonomyLabel::from_profile(p);
          r.profile_id = p.id();
          r.codec_held_out = held_out_flag;
          r.path = record_filename(utt, take, profile_slug(p) +
                                                  (held_out_flag ? "_ho" : ""));
          r.split = spoof_split;
          write_wav(root + "/" + r.path, sp);
          m.records.push_back(r);
        }
      };

      emit_spoofs(task_spoof_profiles(cfg.task, seen, utt), false, split);
      if (!is_seen && cfg.include_unseen_codec)
        emit_spoofs(task_spoof_profiles(cfg.task, held_out, utt), true,
                    "test_unseen_codec");
    }
  }

  save_manifest(m, root + "/manifest.jsonl");
  return m;
}

SplitView split_seen_unseen(const CorpusManifest& manifest,
                            long long id_threshold) {
  if (manifest.empty()) throw ContractError("split_seen_unseen: empty manifest");
  long long lo = std::numeric_limits<long long>::max();
  long long hi = std::numeric_limits<long long>::min();
  for (const auto& r : manifest.records) {
    lo = std::min(lo, r.utt_id);
    hi = std::max(hi, r.utt_id);
  }
  if (id_threshold < lo || id_threshold >= hi)
    throw ContractError(
        "split_seen_unseen: threshold " + std::to_string(id_threshold) +
        " outside the open id range [" + std::to_string(lo) + ", " +
        std::to_string(hi) + ") — one side of the split would be empty");

  SplitView v;
  for (CorpusManifest* part : {&v.train, &v.test_seen, &v.test_unseen}) {
    part->config = manifest.config;
    part->seed = manifest.seed;
    part->root = manifest.root;
  }
  for (const auto& r : manifest.records) {
    if (r.codec_held_out) continue;
    if (r.utt_id <= id_threshold) {
      (r.take == 0 ? v.train : v.test_seen).records.push_back(r);
    } else {
      v.test_unseen.records.push_back(r);
    }
  }
  if (v.train.empty() || v.test_unseen.empty())
    throw ContractError("split_seen_unseen: a split came out empty");
  return v;
}

std::vector<UtteranceRecord> unseen_codec_records(
    const CorpusManifest& manifest) {
  std::vector<UtteranceRecord> out;
  for (const auto& r : manifest.records)
    if (r.codec_held_out) out.push_back(r);
  return out;
}

Waveform load_record_audio(const CorpusManifest& manifest,
                           const UtteranceRecord& record) {
  return read_wav(manifest.root + "/" + record.path);
}

}  // namespace sastnet
