// src/manifest.cc
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
// Corpus manifest persistence: line-delimited JSON with a header line that
// carries the schema version, the generation seed, and a digest of the
// generation config. Keys are emitted in sorted order, so byte-identical
// manifests follow from identical content.

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sastnet/corpus.hpp"

namespace sastnet {

namespace {

using nlohmann::json;

constexpr int kManifestSchema = 1;

json config_to_json(const GenerationConfig& c) {
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

GenerationConfig config_from_json(const json& j) {
  GenerationConfig c;
  c.task = parse_task(j.at("task").get<std::string>());
  c.n_seen_utts = j.at("n_seen_utts").get<int>();
  c.n_unseen_utts = j.at("n_unseen_utts").get<int>();
  c.n_speakers = j.at("n_speakers").get<int>();
  c.voiced_lo = j.at("voiced_lo").get<double>();
  c.voiced_hi = j.at("voiced_hi").get<double>();
  c.silence_lo = j.at("silence_lo").get<double>();
  c.silence_hi = j.at("silence_hi").get<double>();
  c.strength = j.at("strength").get<double>();
  c.include_unseen_codec = j.at("include_unseen_codec").get<bool>();
  c.sample_rate = j.at("sample_rate").get<int>();
  return c;
}

json record_to_json(const UtteranceRecord& r) {
  return json{{"utt_id", r.utt_id},
              {"speaker_id", r.speaker_id},
              {"take", r.take},
              {"vq", r.label.vq},
              {"aux", r.label.aux},
              {"dec", r.label.dec},
              {"bin", r.label.bin},
              {"profile", r.profile_id},
              {"codec_held_out", r.codec_held_out},
              {"silence_head", r.silence_head},
              {"silence_tail", r.silence_tail},
              {"voiced_seconds", r.voiced_seconds},
              {"path", r.path},
              {"split", r.split}};
}

UtteranceRecord record_from_json(const json& j) {
  UtteranceRecord r;
  r.utt_id = j.at("utt_id").get<long long>();
  r.speaker_id = j.at("speaker_id").get<int>();
  r.take = j.at("take").get<int>();
  r.label.vq = j.at("vq").get<int>();
  r.label.aux = j.at("aux").get<int>();
  r.label.dec = j.at("dec").get<int>();
  r.label.bin = j.at("bin").get<int>();
  r.profile_id = j.at("profile").get<std::string>();
  r.codec_held_out = j.at("codec_held_out").get<bool>();
  r.silence_head = j.at("silence_head").get<double>();
  r.silence_tail = j.at("silence_tail").get<double>();
  r.voiced_seconds = j.at("voiced_seconds").get<double>();
  r.path = j.at("path").get<std::string>();
  r.split = j.at("split").get<std::string>();
  if (!r.label.consistent())
    throw IoError("manifest: record with inconsistent label axes (utt " +
                  std::to_string(r.utt_id) + ")");
  return r;
}

}  // namespace

void save_manifest(const CorpusManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_manifest: cannot open '" + path + "'");
  const std::string config_dump = config_to_json(manifest.config).dump();
  json header{{"schema", kManifestSchema},
              {"kind", "sastnet-corpus"},
              {"seed", manifest.seed},
              {"config_digest", Digest().feed(config_dump).hex()},
              {"config", config_to_json(manifest.config)},
              {"n_records", manifest.records.size()}};
  out << header.dump() << "\n";
  for (const auto& r : manifest.records) out << record_to_json(r).dump() << "\n";
  if (!out) throw IoError("save_manifest: write failed for '" + path + "'");
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_manifest: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw IoError("load_manifest: empty manifest '" + path + "'");

  CorpusManifest m;
  try {
    const json header = json::parse(line);
    if (header.at("schema").get<int>() != kManifestSchema)
      throw IoError("load_manifest: unsupported schema version in '" + path + "'");
    if (header.at("kind").get<std::string>() != "sastnet-corpus")
      throw IoError("load_manifest: '" + path + "' is not a corpus manifest");
    m.seed = header.at("seed").get<unsigned long long>();
    m.config = config_from_json(header.at("config"));
    std::size_t n_lines = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      m.records.push_back(record_from_json(json::parse(line)));
      ++n_lines;
    }
    if (n_lines != header.at("n_records").get<std::size_t>())
      throw IoError("load_manifest: record count mismatch in '" + path +
                    "' (header says " +
                    std::to_string(header.at("n_records").get<std::size_t>()) +
                    ", found " + std::to_string(n_lines) + ")");
  } catch (const json::exception& e) {
    throw IoError("load_manifest: malformed JSON in '" + path + "': " + e.what());
  }
  m.root = std::filesystem::path(path).parent_path().string();
  if (m.root.empty()) m.root = ".";
  return m;
}

}  // namespace sastnet
