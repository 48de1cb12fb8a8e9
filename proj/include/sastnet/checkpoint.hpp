// sastnet/checkpoint.hpp
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

#ifndef SASTNET_CHECKPOINT_HPP_
#define SASTNET_CHECKPOINT_HPP_

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sastnet/nn.hpp"

namespace sastnet {

// Self-describing little-endian parameter archive. Parameters are keyed by
// section and layer path; metadata carries run provenance (config digest,
// task, variant, step counters). Round trips are byte exact.

inline constexpr char kCkptMagic[8] = {'S', 'A', 'S', 'T', 'C', 'K', 'P', '1'};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::string get_str(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

inline void put_matf(std::ostream& os, const Matf& m) {
  put_u64(os, static_cast<std::uint64_t>(m.rows()));
  put_u64(os, static_cast<std::uint64_t>(m.cols()));
  if (m.size() > 0)
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
}

inline Matf get_matf(std::istream& is) {
  const auto rows = static_cast<Index>(get_u64(is));
  const auto cols = static_cast<Index>(get_u64(is));
  Matf m(rows, cols);
  if (m.size() > 0)
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
  return m;
}

}  // namespace detail

struct CheckpointSection {
  struct Param {
    std::string name;
    Matf value, m, v;
    bool decay = true;
  };
  std::vector<Param> params;
  bool has_opt = false;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, CheckpointSection> sections;
};

inline void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const ParamStore<float>*>>& sections,
    const std::map<std::string, std::string>& meta, bool with_opt_state) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kCkptMagic, sizeof kCkptMagic);
  detail::put_u32(os, 1u);
  detail::put_u32(os, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    detail::put_str(os, k);
    detail::put_str(os, v);
  }
  detail::put_u32(os, static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, store] : sections) {
    detail::put_str(os, name);
    os.put(static_cast<char>(with_opt_state ? 1 : 0));
    detail::put_u32(os, static_cast<std::uint32_t>(store->entries.size()));
    for (const auto& e : store->entries) {
      detail::put_str(os, e.name);
      os.put(static_cast<char>(e.decay ? 1 : 0));
      detail::put_matf(os, e.value);
      if (with_opt_state) {
        const Matf zeros = Matf::Zero(e.value.rows(), e.value.cols());
        detail::put_matf(os, e.m.size() > 0 ? e.m : zeros);
        detail::put_matf(os, e.v.size() > 0 ? e.v : zeros);
      }
    }
  }
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kCkptMagic, sizeof magic) != 0)
    throw IoError("not a checkpoint archive: " + path);
  const std::uint32_t version = detail::get_u32(is);
  if (version != 1u) throw IoError("unsupported checkpoint version");
  Checkpoint ck;
  const std::uint32_t n_meta = detail::get_u32(is);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = detail::get_str(is);
    ck.meta[k] = detail::get_str(is);
  }
  const std::uint32_t n_sections = detail::get_u32(is);
  for (std::uint32_t si = 0; si < n_sections; ++si) {
    const std::string name = detail::get_str(is);
    CheckpointSection sec;
    sec.has_opt = is.get() != 0;
    const std::uint32_t n_params = detail::get_u32(is);
    for (std::uint32_t pi = 0; pi < n_params; ++pi) {
      CheckpointSection::Param p;
      p.name = detail::get_str(is);
      p.decay = is.get() != 0;
      p.value = detail::get_matf(is);
      if (sec.has_opt) {
        p.m = detail::get_matf(is);
        p.v = detail::get_matf(is);
      }
      sec.params.push_back(std::move(p));
    }
    ck.sections.emplace(name, std::move(sec));
  }
  if (!is) throw IoError("truncated checkpoint: " + path);
  return ck;
}

// Restores values (and moments when present) into an existing store. The
// section must cover exactly the store's parameters with matching shapes.
inline void restore_params(ParamStore<float>& ps, const CheckpointSection& sec) {
  if (sec.params.size() != ps.entries.size())
    throw ContractError("checkpoint section parameter count mismatch");
  for (const auto& p : sec.params) {
    const int idx = ps.find(p.name);
    if (idx < 0) throw ContractError("checkpoint has unknown parameter: " + p.name);
    auto& e = ps.entry(idx);
    if (e.value.rows() != p.value.rows() || e.value.cols() != p.value.cols())
      throw ContractError("checkpoint shape mismatch for: " + p.name);
    e.value = p.value;
    if (sec.has_opt) {
      e.m = p.m;
      e.v = p.v;
    }
  }
}

inline std::uint64_t file_digest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open file for digest: " + path);
  Digest d;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    const auto got = static_cast<std::size_t>(is.gcount());
    if (got > 0) d.feed(buf, got);
  }
  return d.value();
}

}  // namespace sastnet

#endif  // SASTNET_CHECKPOINT_HPP_
