// sastnet/audio_io.cc
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

#include <cstdint>
#include <fstream>

#include "sastnet/audio.hpp"

namespace sastnet {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u16(std::ostream& os, std::uint16_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint16_t get_u16(std::istream& is) {
  std::uint16_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

// Mono 16-bit PCM RIFF/WAVE. Samples are clipped to [-1, 1] and rounded to
// the nearest code.
void write_wav(const std::string& path, const Waveform& w) {
  if (w.size() <= 0) throw ContractError("write_wav: empty waveform");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  const auto n = static_cast<std::uint32_t>(w.size());
  const std::uint32_t data_bytes = n * 2u;
  os.write("RIFF", 4);
  put_u32(os, 36u + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16u);
  put_u16(os, 1u);  // PCM
  put_u16(os, 1u);  // mono
  put_u32(os, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(os, static_cast<std::uint32_t>(w.sample_rate) * 2u);
  put_u16(os, 2u);
  put_u16(os, 16u);
  os.write("data", 4);
  put_u32(os, data_bytes);
  for (Index i = 0; i < w.size(); ++i) {
    const float x = std::min(1.0f, std::max(-1.0f, w.samples(i)));
    const auto code = static_cast<std::int16_t>(std::lrintf(x * 32767.0f));
    os.write(reinterpret_cast<const char*>(&code), 2);
  }
  if (!os) throw IoError("failed writing wav: " + path);
}

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open wav: " + path);
  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0) throw IoError("not RIFF: " + path);
  get_u32(is);
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0) throw IoError("not WAVE: " + path);

  Waveform w;
  bool have_fmt = false;
  while (is) {
    is.read(tag, 4);
    if (!is) break;
    const std::uint32_t chunk = get_u32(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const std::uint16_t format = get_u16(is);
      const std::uint16_t channels = get_u16(is);
      const std::uint32_t rate = get_u32(is);
      get_u32(is);
      get_u16(is);
      const std::uint16_t bits = get_u16(is);
      if (format != 1 || channels != 1 || bits != 16)
        throw IoError("unsupported wav encoding (need mono 16-bit PCM): " + path);
      w.sample_rate = static_cast<int>(rate);
      if (chunk > 16) is.seekg(chunk - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IoError("wav data before fmt: " + path);
      const std::uint32_t n = chunk / 2;
      w.samples.resize(static_cast<Index>(n));
      for (std::uint32_t i = 0; i < n; ++i) {
        std::int16_t code = 0;
        is.read(reinterpret_cast<char*>(&code), 2);
        w.samples(static_cast<Index>(i)) = static_cast<float>(code) / 32767.0f;
      }
      if (!is) throw IoError("truncated wav data: " + path);
      return w;
    } else {
      is.seekg(chunk + (chunk & 1u), std::ios::cur);
    }
  }
  throw IoError("wav has no data chunk: " + path);
}

}  // namespace sastnet
