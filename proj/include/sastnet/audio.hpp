// sastnet/audio.hpp
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

#ifndef SASTNET_AUDIO_HPP_
#define SASTNET_AUDIO_HPP_

#include <algorithm>
#include <string>

#include "sastnet/core.hpp"

namespace sastnet {

struct Waveform {
  Vecf samples;
  int sample_rate = 16000;

  Index size() const { return samples.size(); }
  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// 16-bit PCM mono RIFF/WAVE. Implemented in audio_io.cc.
void write_wav(const std::string& path, const Waveform& w);
Waveform read_wav(const std::string& path);

struct SynthConfig {
  int sample_rate = 16000;
  double peak = 0.7;             // voiced-region peak after normalization
  double noise_floor_db = -80.0; // additive floor, well below the trim threshold
  int n_harmonics = 10;
  double ramp_ms = 10.0;         // onset/offset ramp, avoids boundary clicks
};

struct UtteranceSpec {
  std::int64_t utt_id = 0;
  std::int64_t speaker_id = 0;
  double voiced_seconds = 1.5;
  double head_silence_seconds = 0.2;
  double tail_silence_seconds = 0.2;
};

namespace detail {

struct VoiceParams {
  double f0_base, vib_rate, vib_depth, drift_rate, drift_depth;
  double syllable_rate, syllable_shape, slow_rate, slow_depth;
  double formant_hz[3], formant_bw[3], formant_gain[3];
  double formant_drift_rate[3], formant_drift_depth[3];
  double breath_level;
};

inline VoiceParams draw_voice_params(Rng& rng) {
  VoiceParams p{};
  p.f0_base = rng.uniform(95.0, 230.0);
  p.vib_rate = rng.uniform(4.5, 6.5);
  p.vib_depth = rng.uniform(0.003, 0.010);
  p.drift_rate = rng.uniform(0.2, 0.5);
  p.drift_depth = rng.uniform(0.02, 0.06);
  p.syllable_rate = rng.uniform(2.5, 4.5);
  p.syllable_shape = rng.uniform(0.8, 1.6);
  p.slow_rate = rng.uniform(0.4, 0.9);
  p.slow_depth = rng.uniform(0.10, 0.25);
  const double lo[3] = {350.0, 1200.0, 2500.0};
  const double hi[3] = {900.0, 2400.0, 3400.0};
  const double bw[3] = {90.0, 130.0, 180.0};
  for (int j = 0; j < 3; ++j) {
    p.formant_hz[j] = rng.uniform(lo[j], hi[j]);
    p.formant_bw[j] = bw[j] * rng.uniform(0.8, 1.3);
    p.formant_gain[j] = rng.uniform(0.6, 1.0) / (j + 1);
    p.formant_drift_rate[j] = rng.uniform(0.3, 0.8);
    p.formant_drift_depth[j] = rng.uniform(0.02, 0.05);
  }
  p.breath_level = rng.uniform(0.008, 0.02);
  return p;
}

}  // namespace detail

// Deterministic additive pseudo-speech. The voiced segment is a pure function
// of time since voiced onset (pitch, formant and envelope trajectories are
// evaluated against that clock and the noise streams are segment-local), so
// changing the surrounding silence shifts the voiced samples without altering
// them. Phase accumulates in double to keep long utterances click-free.
inline Waveform synth_utterance(const UtteranceSpec& spec,
                                const SynthConfig& cfg, const Rng& utt_rng,
                                const Rng& speaker_rng) {
  if (spec.voiced_seconds <= 0.0)
    throw ContractError("synth_utterance: voiced_seconds must be positive");
  if (spec.head_silence_seconds < 0.0 || spec.tail_silence_seconds < 0.0)
    throw ContractError("synth_utterance: silence durations must be >= 0");
  const int sr = cfg.sample_rate;
  const auto n_head = static_cast<Index>(std::llround(spec.head_silence_seconds * sr));
  const auto n_voiced = static_cast<Index>(std::llround(spec.voiced_seconds * sr));
  const auto n_tail = static_cast<Index>(std::llround(spec.tail_silence_seconds * sr));

  Rng voice_rng = utt_rng.derive("voice");
  detail::VoiceParams p = detail::draw_voice_params(voice_rng);
  Rng tilt_rng = speaker_rng.derive("tilt");
  const double tilt_db_per_oct = -(3.0 + 9.0 * tilt_rng.uniform());

  const double two_pi = 6.283185307179586476925286766559;
  const int nh = cfg.n_harmonics;
  std::vector<double> phase(static_cast<std::size_t>(nh), 0.0);
  Rng breath_rng = utt_rng.derive("breath");

  Vecd voiced(n_voiced);
  const double ramp_len = cfg.ramp_ms / 1000.0;
  for (Index i = 0; i < n_voiced; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double f0 = p.f0_base *
                      (1.0 + p.vib_depth * std::sin(two_pi * p.vib_rate * t) +
                       p.drift_depth * std::sin(two_pi * p.drift_rate * t));
    double env = 0.35 + 0.65 * std::pow(
        0.5 - 0.5 * std::cos(two_pi * p.syllable_rate * t), p.syllable_shape);
    env *= 1.0 - p.slow_depth * (0.5 - 0.5 * std::cos(two_pi * p.slow_rate * t));
    const double from_start = t;
    const double from_end = spec.voiced_seconds - t;
    if (from_start < ramp_len)
      env *= 0.5 - 0.5 * std::cos(two_pi * 0.5 * from_start / ramp_len);
    if (from_end < ramp_len)
      env *= 0.5 - 0.5 * std::cos(two_pi * 0.5 * std::max(from_end, 0.0) / ramp_len);

    double sample = 0.0;
    for (int k = 1; k <= nh; ++k) {
      const double fk = k * f0;
      if (fk >= sr / 2.0) break;
      phase[static_cast<std::size_t>(k - 1)] += two_pi * fk / sr;
      double gain = 0.0;
      for (int j = 0; j < 3; ++j) {
        const double fj = p.formant_hz[j] *
                          (1.0 + p.formant_drift_depth[j] *
                                     std::sin(two_pi * p.formant_drift_rate[j] * t));
        const double d = (fk - fj) / p.formant_bw[j];
        gain += p.formant_gain[j] / (1.0 + d * d);
      }
      const double tilt =
          (fk > 200.0)
              ? std::pow(10.0, tilt_db_per_oct * std::log2(fk / 200.0) / 20.0)
              : 1.0;
      sample += gain * tilt / std::sqrt(static_cast<double>(k)) *
                std::sin(phase[static_cast<std::size_t>(k - 1)]);
    }
    sample += p.breath_level * breath_rng.normal();
    voiced(i) = env * sample;
  }

  const double peak = voiced.cwiseAbs().maxCoeff();
  if (peak > 0.0) voiced *= cfg.peak / peak;

  Waveform w;
  w.sample_rate = sr;
  w.samples = Vecf::Zero(n_head + n_voiced + n_tail);
  for (Index i = 0; i < n_voiced; ++i)
    w.samples(n_head + i) = static_cast<float>(voiced(i));

  const double floor_amp = db_to_amplitude(cfg.noise_floor_db);
  Rng head_rng = utt_rng.derive("noise-head");
  Rng body_rng = utt_rng.derive("noise-body");
  Rng tail_rng = utt_rng.derive("noise-tail");
  for (Index i = 0; i < n_head; ++i)
    w.samples(i) += static_cast<float>(floor_amp * head_rng.normal());
  for (Index i = 0; i < n_voiced; ++i)
    w.samples(n_head + i) += static_cast<float>(floor_amp * body_rng.normal());
  for (Index i = 0; i < n_tail; ++i)
    w.samples(n_head + n_voiced + i) += static_cast<float>(floor_amp * tail_rng.normal());
  return w;
}

struct SilenceConfig {
  double threshold_db = -50.0;  // frame RMS in dBFS
  double frame_ms = 25.0;
  double hop_ms = 10.0;
};

namespace detail {

inline std::vector<char> silent_frame_flags(const Waveform& w,
                                            const SilenceConfig& cfg,
                                            Index* frame_len_out,
                                            Index* hop_out) {
  if (w.size() <= 0) throw ContractError("silence analysis: empty waveform");
  const auto frame_len =
      std::max<Index>(1, static_cast<Index>(std::llround(cfg.frame_ms / 1000.0 * w.sample_rate)));
  const auto hop =
      std::max<Index>(1, static_cast<Index>(std::llround(cfg.hop_ms / 1000.0 * w.sample_rate)));
  const Index n = w.size();
  const Index n_frames = (n <= frame_len) ? 1 : (n - frame_len) / hop + 1;
  std::vector<char> silent(static_cast<std::size_t>(n_frames));
  for (Index f = 0; f < n_frames; ++f) {
    const Index start = f * hop;
    const Index len = std::min(frame_len, n - start);
    const double ms =
        static_cast<double>(w.samples.segment(start, len).squaredNorm()) / static_cast<double>(len);
    const double rms_db = amplitude_to_db(std::sqrt(ms));
    silent[static_cast<std::size_t>(f)] = rms_db < cfg.threshold_db ? 1 : 0;
  }
  if (frame_len_out) *frame_len_out = frame_len;
  if (hop_out) *hop_out = hop;
  return silent;
}

}  // namespace detail

// Fraction of analysis frames whose RMS sits below the threshold.
inline double silence_proportion(const Waveform& w, const SilenceConfig& cfg = {}) {
  const auto silent = detail::silent_frame_flags(w, cfg, nullptr, nullptr);
  std::size_t count = 0;
  for (char s : silent) count += static_cast<std::size_t>(s);
  return static_cast<double>(count) / static_cast<double>(silent.size());
}

// Crops to [first, last] non-silent frame span. Each retained boundary lies
// within one frame length of the true silence boundary. Returns an empty
// waveform when every frame is silent.
inline Waveform trim_silence(const Waveform& w, const SilenceConfig& cfg = {}) {
  Index frame_len = 0, hop = 0;
  const auto silent = detail::silent_frame_flags(w, cfg, &frame_len, &hop);
  const auto n_frames = static_cast<Index>(silent.size());
  Index first = -1, last = -1;
  for (Index f = 0; f < n_frames; ++f)
    if (!silent[static_cast<std::size_t>(f)]) {
      if (first < 0) first = f;
      last = f;
    }
  Waveform out;
  out.sample_rate = w.sample_rate;
  if (first < 0) {
    out.samples = Vecf(0);
    return out;
  }
  const Index begin = first * hop;
  const Index end = std::min<Index>(w.size(), last * hop + frame_len);
  out.samples = w.samples.segment(begin, end - begin);
  return out;
}

}  // namespace sastnet

#endif  // SASTNET_AUDIO_HPP_
