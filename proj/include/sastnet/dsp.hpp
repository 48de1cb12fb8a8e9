// sastnet/dsp.hpp
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

#ifndef SASTNET_DSP_HPP_
#define SASTNET_DSP_HPP_

#include <complex>
#include <vector>

#include "sastnet/core.hpp"

namespace sastnet {

using Cplx = std::complex<float>;
using MatC = Eigen::Matrix<Cplx, Eigen::Dynamic, Eigen::Dynamic>;

inline bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT. n must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(static_cast<Index>(n)))
    throw ContractError("fft_radix2: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double pi = 3.14159265358979323846;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

// Periodic Hann window, the analysis and synthesis window throughout.
inline Vecf hann_window(Index n) {
  Vecf w(n);
  const double pi = 3.14159265358979323846;
  for (Index i = 0; i < n; ++i)
    w(i) = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(n)));
  return w;
}

struct StftConfig {
  int n_fft = 512;
  int hop = 160;
};

inline Index stft_num_frames(Index n_samples, int hop) {
  if (n_samples <= 0) throw ContractError("stft: empty input");
  return (n_samples + hop - 1) / hop;
}

// Centered STFT: frame t covers samples [t*hop - n_fft/2, t*hop + n_fft/2)
// of the zero-padded signal. Rows are frames, columns the n_fft/2+1 bins.
inline MatC stft(const Vecf& x, const StftConfig& cfg) {
  if (!is_power_of_two(cfg.n_fft))
    throw ContractError("stft: n_fft must be a power of two");
  if (cfg.hop <= 0 || cfg.hop > cfg.n_fft)
    throw ContractError("stft: hop must be in (0, n_fft]");
  const Index n = x.size();
  const Index frames = stft_num_frames(n, cfg.hop);
  const Index bins = cfg.n_fft / 2 + 1;
  const Index half = cfg.n_fft / 2;
  const Vecf win = hann_window(cfg.n_fft);
  MatC out(frames, bins);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.n_fft));
  for (Index t = 0; t < frames; ++t) {
    const Index start = t * cfg.hop - half;
    for (Index i = 0; i < cfg.n_fft; ++i) {
      const Index s = start + i;
      const double v = (s >= 0 && s < n) ? static_cast<double>(x(s)) : 0.0;
      buf[static_cast<std::size_t>(i)] = v * static_cast<double>(win(i));
    }
    fft_radix2(buf, false);
    for (Index b = 0; b < bins; ++b)
      out(t, b) = Cplx(static_cast<float>(buf[static_cast<std::size_t>(b)].real()),
                       static_cast<float>(buf[static_cast<std::size_t>(b)].imag()));
  }
  return out;
}

// Weighted overlap-add inverse of stft(): synthesis uses the same window and
// normalizes by the accumulated squared window, so untouched frames
// reconstruct the interior of the signal to float rounding.
inline Vecf istft(const MatC& spec, const StftConfig& cfg, Index out_len) {
  const Index frames = spec.rows();
  const Index bins = cfg.n_fft / 2 + 1;
  if (spec.cols() != bins) throw ContractError("istft: bin count mismatch");
  if (out_len <= 0) throw ContractError("istft: out_len must be positive");
  const Index half = cfg.n_fft / 2;
  const Vecf win = hann_window(cfg.n_fft);
  Vecd acc = Vecd::Zero(out_len);
  Vecd norm = Vecd::Zero(out_len);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.n_fft));
  for (Index t = 0; t < frames; ++t) {
    for (Index b = 0; b < bins; ++b)
      buf[static_cast<std::size_t>(b)] =
          std::complex<double>(spec(t, b).real(), spec(t, b).imag());
    for (Index b = bins; b < cfg.n_fft; ++b)
      buf[static_cast<std::size_t>(b)] = std::conj(buf[static_cast<std::size_t>(cfg.n_fft - b)]);
    fft_radix2(buf, true);
    const Index start = t * cfg.hop - half;
    for (Index i = 0; i < cfg.n_fft; ++i) {
      const Index s = start + i;
      if (s < 0 || s >= out_len) continue;
      const double w = static_cast<double>(win(i));
      acc(s) += buf[static_cast<std::size_t>(i)].real() * w;
      norm(s) += w * w;
    }
  }
  Vecf y(out_len);
  for (Index s = 0; s < out_len; ++s)
    y(s) = static_cast<float>(acc(s) / std::max(norm(s), 1e-8));
  return y;
}

// HTK mel scale.
inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular mel filterbank over the power spectrum, rows are mel bands.
inline Matf mel_filterbank(int n_mels, int n_fft, double sample_rate,
                           double fmin, double fmax) {
  if (n_mels <= 0) throw ContractError("mel_filterbank: n_mels must be positive");
  if (!(fmin >= 0.0 && fmax > fmin && fmax <= sample_rate / 2.0))
    throw ContractError("mel_filterbank: need 0 <= fmin < fmax <= sr/2");
  const Index bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[static_cast<std::size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  Matf fb = Matf::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    for (Index b = 0; b < bins; ++b) {
      const double f = sample_rate * static_cast<double>(b) / n_fft;
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb(m, static_cast<Index>(b)) = static_cast<float>(w);
    }
  }
  return fb;
}

struct MelConfig {
  int n_fft = 512;
  int hop = 160;
  int n_mels = 64;
  double sample_rate = 16000.0;
  double fmin = 0.0;
  double fmax = 8000.0;
  float eps = 1e-6f;
};

inline Matf power_spectrogram(const Vecf& x, const StftConfig& cfg) {
  const MatC spec = stft(x, cfg);
  return spec.array().abs2().matrix();
}

// Rows are frames (ceil(N/hop) of them), columns mel bands; values
// ln(power + eps).
inline Matf log_mel(const Vecf& x, const MelConfig& cfg) {
  const Matf pow_spec = power_spectrogram(x, StftConfig{cfg.n_fft, cfg.hop});
  const Matf fb = mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate,
                                 cfg.fmin, cfg.fmax);
  Matf mel = pow_spec * fb.transpose();
  return (mel.array() + cfg.eps).log().matrix();
}

// Griffin-Lim phase reconstruction from a magnitude spectrogram. Each
// iteration projects onto the target magnitudes, then onto the set of
// consistent spectrograms via istft/stft.
inline Vecf griffin_lim(const Matf& mag, const StftConfig& cfg, Index out_len,
                        int iters, Rng& rng) {
  if (iters < 1) throw ContractError("griffin_lim: iters must be >= 1");
  const Index frames = mag.rows();
  const Index bins = mag.cols();
  MatC spec(frames, bins);
  const double pi = 3.14159265358979323846;
  for (Index t = 0; t < frames; ++t)
    for (Index b = 0; b < bins; ++b) {
      const double phase = rng.uniform(0.0, 2.0 * pi);
      spec(t, b) = mag(t, b) * Cplx(static_cast<float>(std::cos(phase)),
                                    static_cast<float>(std::sin(phase)));
    }
  Vecf y;
  for (int it = 0; it < iters; ++it) {
    y = istft(spec, cfg, out_len);
    const MatC re = stft(y, cfg);
    for (Index t = 0; t < frames; ++t)
      for (Index b = 0; b < bins; ++b) {
        const float a = std::abs(re(t, b));
        spec(t, b) = (a > 1e-12f) ? Cplx(re(t, b) * (mag(t, b) / a))
                                  : Cplx(mag(t, b), 0.0f);
      }
  }
  return istft(spec, cfg, out_len);
}

}  // namespace sastnet

#endif  // SASTNET_DSP_HPP_
