// include/sastnet/corpus.hpp
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
// Labeled synthetic corpus: bona fide pseudo-speech utterances plus
// codec-fingerprinted resyntheses spanning three artifact axes (quantizer,
// auxiliary objective, decoder), with controlled silence and content-id
// splits. Corpora are task-balanced: REAL and every spoof class of the
// requested task appear in equal counts per split.

#pragma once

#include <string>
#include <vector>

#include "sastnet/audio.hpp"
#include "sastnet/codec.hpp"
#include "sastnet/core.hpp"

namespace sastnet {

// ---------------------------------------------------------------------------
// Tasks and labels
// ---------------------------------------------------------------------------

enum class Task { kVq, kAux, kDec, kBin };

inline int n_classes(Task task) {
  switch (task) {
    case Task::kVq: return 4;
    case Task::kAux: return 3;
    case Task::kDec: return 3;
    case Task::kBin: return 2;
  }
  throw ContractError("n_classes: bad task");
}

inline std::string to_string(Task task) {
  switch (task) {
    case Task::kVq: return "vq";
    case Task::kAux: return "aux";
    case Task::kDec: return "dec";
    case Task::kBin: return "bin";
  }
  throw ContractError("to_string: bad task");
}

inline Task parse_task(const std::string& s) {
  if (s == "vq") return Task::kVq;
  if (s == "aux") return Task::kAux;
  if (s == "dec") return Task::kDec;
  if (s == "bin") return Task::kBin;
  throw UsageError("unknown task '" + s + "' (expected vq|aux|dec|bin)");
}

// Class indices per axis. Index 0 is always the bona fide class.
//   vq:  0=REAL 1=MVQ  2=SVQ 3=SQ
//   aux: 0=REAL 1=SD   2=DIS
//   dec: 0=REAL 1=TIME 2=FREQ
//   bin: 0=BONAFIDE 1=SPOOF
struct TaxonomyLabel {
  int vq = 0;
  int aux = 0;
  int dec = 0;
  int bin = 0;

  static TaxonomyLabel bonafide() { return TaxonomyLabel{}; }

  static TaxonomyLabel from_profile(const CodecProfile& p) {
    TaxonomyLabel l;
    switch (p.vq) {
      case VqKind::kMultiCodebook: l.vq = 1; break;
      case VqKind::kSingleCodebook: l.vq = 2; break;
      case VqKind::kScalar: l.vq = 3; break;
    }
    switch (p.aux) {
      case AuxKind::kSemanticDistill: l.aux = 1; break;
      case AuxKind::kDisentangle: l.aux = 2; break;
      case AuxKind::kNone:
        throw ContractError("spoof profile must carry an auxiliary artifact");
    }
    switch (p.dec) {
      case DecKind::kTime: l.dec = 1; break;
      case DecKind::kFreq: l.dec = 2; break;
    }
    l.bin = 1;
    return l;
  }

  // The bona fide class must align across all axes.
  bool consistent() const {
    const bool real = (bin == 0);
    return (vq == 0) == real && (aux == 0) == real && (dec == 0) == real;
  }

  int index_for(Task task) const {
    switch (task) {
      case Task::kVq: return vq;
      case Task::kAux: return aux;
      case Task::kDec: return dec;
      case Task::kBin: return bin;
    }
    throw ContractError("index_for: bad task");
  }
};

inline std::string class_name(Task task, int index) {
  static const char* kVqNames[] = {"real", "mvq", "svq", "sq"};
  static const char* kAuxNames[] = {"real", "sd", "dis"};
  static const char* kDecNames[] = {"real", "time", "freq"};
  static const char* kBinNames[] = {"bonafide", "spoof"};
  if (index < 0 || index >= n_classes(task))
    throw ContractError("class_name: index out of range");
  switch (task) {
    case Task::kVq: return kVqNames[index];
    case Task::kAux: return kAuxNames[index];
    case Task::kDec: return kDecNames[index];
    case Task::kBin: return kBinNames[index];
  }
  throw ContractError("class_name: bad task");
}

// ---------------------------------------------------------------------------
// Records and manifests
// ---------------------------------------------------------------------------

// Split tags. "train" and "test_seen" share utterance ids (distinct takes);
// "test_unseen" holds ids above the threshold; records generated with
// held-out codec profiles carry codec_held_out=true and live outside the
// three canonical splits (the evaluation module composes them with unseen
// bona fide records into the unseen-codec cell).
struct UtteranceRecord {
  long long utt_id = 0;
  int speaker_id = 0;
  int take = 0;
  TaxonomyLabel label;
  std::string profile_id;  // empty for bona fide
  bool codec_held_out = false;
  double silence_head = 0.0;  // seconds
  double silence_tail = 0.0;  // seconds
  double voiced_seconds = 0.0;
  std::string path;   // relative to the corpus root
  std::string split;  // train | test_seen | test_unseen
};

struct GenerationConfig {
  Task task = Task::kAux;
  int n_seen_utts = 16;    // ids 1..n_seen_utts, takes 0 (train) and 1 (seen test)
  int n_unseen_utts = 8;   // ids n_seen_utts+1.., take 0 only
  int n_speakers = 4;
  double voiced_lo = 1.2;   // seconds
  double voiced_hi = 1.8;
  double silence_lo = 0.25;  // per end, seconds
  double silence_hi = 0.45;
  double strength = 0.6;
  bool include_unseen_codec = true;
  int sample_rate = 16000;

  void validate() const {
    if (n_seen_utts < 2) throw UsageError("corpus: need at least 2 seen utterances");
    if (n_unseen_utts < 0) throw UsageError("corpus: negative unseen count");
    if (n_speakers < 1) throw UsageError("corpus: need at least one speaker");
    if (!(voiced_lo > 0) || voiced_hi < voiced_lo)
      throw UsageError("corpus: bad voiced duration range");
    if (silence_lo < 0 || silence_hi < silence_lo)
      throw UsageError("corpus: bad silence range");
    if (!(strength > 0.0) || strength > 1.0)
      throw UsageError("corpus: strength must lie in (0,1]");
    if (sample_rate <= 0) throw UsageError("corpus: bad sample rate");
  }

  long long id_threshold() const { return n_seen_utts; }
};

struct CorpusManifest {
  std::vector<UtteranceRecord> records;
  GenerationConfig config;
  unsigned long long seed = 0;
  std::string root;  // directory holding wav/ and manifest.jsonl

  bool empty() const { return records.empty(); }
};

// ---------------------------------------------------------------------------
// Codec profile grid
// ---------------------------------------------------------------------------

// The 12 valid spoof profiles (3 quantizers x 2 auxiliary artifacts x
// 2 decoders) are split into 6 training profiles and 6 held-out profiles so
// that every axis VALUE appears in both halves; only the combination is
// novel at evaluation time.
std::vector<CodecProfile> seen_profiles(double strength);
std::vector<CodecProfile> held_out_profiles(double strength);

// ---------------------------------------------------------------------------
// Generation and splits
// ---------------------------------------------------------------------------

// Synthesizes one bona fide utterance deterministically from (seed, utt_id,
// speaker_id, take). Voiced content depends only on (seed, utt_id); the
// silence framing depends on the take.
Waveform synth_record(const GenerationConfig& cfg, unsigned long long seed,
                      long long utt_id, int take, double* head_out,
                      double* tail_out, double* voiced_out);

// Generates all waveforms under root/wav/ and writes root/manifest.jsonl.
// Regenerating with the same (config, seed) yields byte-identical artifacts.
CorpusManifest build_corpus(const GenerationConfig& cfg,
                            unsigned long long seed, const std::string& root);

struct SplitView {
  CorpusManifest train;
  CorpusManifest test_seen;
  CorpusManifest test_unseen;
};

// Partitions by utterance id: takes 0/1 of ids <= threshold become
// train/test_seen; ids above it become test_unseen. Held-out-codec records
// are excluded from all three (see unseen_codec_records). Throws if the
// threshold falls outside the manifest's id range or the unseen side is
// empty.
SplitView split_seen_unseen(const CorpusManifest& manifest,
                            long long id_threshold);

// Records carrying held-out codec profiles (spoofs only).
std::vector<UtteranceRecord> unseen_codec_records(
    const CorpusManifest& manifest);

// Manifest persistence (JSONL with a header line carrying schema version,
// seed, and the full generation config).
void save_manifest(const CorpusManifest& manifest, const std::string& path);
CorpusManifest load_manifest(const std::string& path);

// Loads a record's waveform from disk.
Waveform load_record_audio(const CorpusManifest& manifest,
                           const UtteranceRecord& record);

}  // namespace sastnet
