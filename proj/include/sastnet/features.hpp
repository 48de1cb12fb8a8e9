// sastnet/features.hpp
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

#ifndef SASTNET_FEATURES_HPP_
#define SASTNET_FEATURES_HPP_

#include <vector>

#include "sastnet/audio.hpp"
#include "sastnet/dsp.hpp"

namespace sastnet {

struct FeatureConfig {
  int target_samples = 32800;  // 2.05 s at 16 kHz
  int n_fft = 512;
  int hop = 160;
  int n_mels = 64;
  float mel_eps = 1e-6f;
  double fmin = 0.0;
  double fmax = 8000.0;
  // Affine normalization applied to log-mel model inputs and targets.
  float mel_mean = -6.0f;
  float mel_std = 3.0f;
  int patch_h = 8;  // time rows per patch
  int patch_w = 8;  // mel/channel columns per patch
  double mask_ratio = 0.4;

  MelConfig mel() const {
    MelConfig m;
    m.n_fft = n_fft;
    m.hop = hop;
    m.n_mels = n_mels;
    m.fmin = fmin;
    m.fmax = fmax;
    m.eps = mel_eps;
    return m;
  }
};

enum class CropMode { kTrain, kEval };

// Fixed-length view of a waveform: longer inputs are cropped (random offset
// in training, centered in eval), shorter inputs are repeat-padded by tiling
// so codec texture persists instead of trailing zeros.
inline Waveform pad_or_crop(const Waveform& w, Index target, CropMode mode,
                            Rng rng) {
  if (target <= 0) throw ContractError("pad_or_crop: target must be positive");
  if (w.size() <= 0) throw ContractError("pad_or_crop: empty waveform");
  Waveform out;
  out.sample_rate = w.sample_rate;
  const Index n = w.size();
  if (n == target) {
    out.samples = w.samples;
    return out;
  }
  if (n > target) {
    const Index span = n - target;
    const Index start = (mode == CropMode::kTrain)
                            ? static_cast<Index>(rng.randint(span + 1))
                            : span / 2;
    out.samples = w.samples.segment(start, target);
    return out;
  }
  out.samples.resize(target);
  for (Index i = 0; i < target; ++i) out.samples(i) = w.samples(i % n);
  return out;
}

// Normalized log-mel for model consumption.
inline Matf model_log_mel(const Waveform& w, const FeatureConfig& cfg) {
  Matf m = log_mel(w.samples, cfg.mel());
  return ((m.array() - cfg.mel_mean) / cfg.mel_std).matrix();
}

// ---------------------------------------------------------------------------
// Patch grid. Patches tile a frames x channels matrix time-major:
// patch p = t * f_p + f covers rows [t*ph, (t+1)*ph) and cols [f*pw, (f+1)*pw),
// flattened row-major. Ragged edges are zero-padded; unpatchify drops the pad,
// making the round trip exact on the original region.
// ---------------------------------------------------------------------------

template <class S>
struct PatchGrid {
  Mat<S> patches;  // P x (ph*pw)
  Index t_p = 0, f_p = 0;
  Index ph = 0, pw = 0;
  Index rows = 0, cols = 0;  // original matrix extent
};

template <class S>
PatchGrid<S> patchify(const Mat<S>& x, Index ph, Index pw) {
  if (ph <= 0 || pw <= 0) throw ContractError("patchify: patch dims must be positive");
  if (x.rows() <= 0 || x.cols() <= 0) throw ContractError("patchify: empty input");
  PatchGrid<S> g;
  g.ph = ph;
  g.pw = pw;
  g.rows = x.rows();
  g.cols = x.cols();
  g.t_p = (x.rows() + ph - 1) / ph;
  g.f_p = (x.cols() + pw - 1) / pw;
  g.patches = Mat<S>::Zero(g.t_p * g.f_p, ph * pw);
  for (Index t = 0; t < g.t_p; ++t)
    for (Index f = 0; f < g.f_p; ++f) {
      const Index p = t * g.f_p + f;
      for (Index i = 0; i < ph; ++i) {
        const Index r = t * ph + i;
        if (r >= x.rows()) continue;
        for (Index j = 0; j < pw; ++j) {
          const Index c = f * pw + j;
          if (c >= x.cols()) continue;
          g.patches(p, i * pw + j) = x(r, c);
        }
      }
    }
  return g;
}

template <class S>
Mat<S> unpatchify(const PatchGrid<S>& g) {
  Mat<S> x = Mat<S>::Zero(g.rows, g.cols);
  for (Index t = 0; t < g.t_p; ++t)
    for (Index f = 0; f < g.f_p; ++f) {
      const Index p = t * g.f_p + f;
      for (Index i = 0; i < g.ph; ++i) {
        const Index r = t * g.ph + i;
        if (r >= g.rows) continue;
        for (Index j = 0; j < g.pw; ++j) {
          const Index c = f * g.pw + j;
          if (c >= g.cols) continue;
          x(r, c) = g.patches(p, i * g.pw + j);
        }
      }
    }
  return x;
}

// ---------------------------------------------------------------------------
// Mask plan. Half the mask budget goes to whole time columns of the patch
// grid, half to whole frequency rows (floor rounding on each), and any
// shortfall against round(ratio * P) is filled with individual patches.
// ---------------------------------------------------------------------------

struct MaskPlan {
  Index t_p = 0, f_p = 0;
  double ratio = 0.0;
  std::vector<int> time_cols;   // masked time indices, each covers f_p patches
  std::vector<int> freq_rows;   // masked channel indices, each covers t_p patches
  std::vector<int> fill;        // individually masked patch ids
  bool fill_used = false;
  std::vector<char> flags;      // size t_p*f_p, 1 = masked
  std::vector<int> masked;      // ascending patch ids
  std::vector<int> visible;     // ascending patch ids

  Index total() const { return t_p * f_p; }
  Index masked_count() const { return static_cast<Index>(masked.size()); }
};

inline MaskPlan plan_mask(Index t_p, Index f_p, double ratio, Rng rng) {
  if (t_p <= 0 || f_p <= 0) throw ContractError("plan_mask: empty grid");
  if (ratio < 0.0 || ratio >= 1.0)
    throw ContractError("plan_mask: ratio must be in [0, 1)");
  MaskPlan plan;
  plan.t_p = t_p;
  plan.f_p = f_p;
  plan.ratio = ratio;
  const Index total = t_p * f_p;
  const auto target = static_cast<Index>(std::llround(ratio * static_cast<double>(total)));
  const auto n_time = static_cast<Index>(std::floor(ratio / 2.0 * static_cast<double>(t_p)));
  const auto n_freq = static_cast<Index>(std::floor(ratio / 2.0 * static_cast<double>(f_p)));

  std::vector<int> cols = rng.sample_without_replacement(static_cast<int>(t_p),
                                                         static_cast<int>(n_time));
  std::vector<int> rows = rng.sample_without_replacement(static_cast<int>(f_p),
                                                         static_cast<int>(n_freq));
  std::sort(cols.begin(), cols.end());
  std::sort(rows.begin(), rows.end());
  plan.time_cols = cols;
  plan.freq_rows = rows;

  plan.flags.assign(static_cast<std::size_t>(total), 0);
  for (int t : cols)
    for (Index f = 0; f < f_p; ++f)
      plan.flags[static_cast<std::size_t>(t * f_p + f)] = 1;
  for (int f : rows)
    for (Index t = 0; t < t_p; ++t)
      plan.flags[static_cast<std::size_t>(t * f_p + f)] = 1;

  Index covered = 0;
  for (char c : plan.flags) covered += c;
  if (covered < target) {
    std::vector<int> pool;
    pool.reserve(static_cast<std::size_t>(total - covered));
    for (Index p = 0; p < total; ++p)
      if (!plan.flags[static_cast<std::size_t>(p)]) pool.push_back(static_cast<int>(p));
    rng.shuffle(pool);
    const Index need = target - covered;
    for (Index i = 0; i < need; ++i) {
      plan.fill.push_back(pool[static_cast<std::size_t>(i)]);
      plan.flags[static_cast<std::size_t>(pool[static_cast<std::size_t>(i)])] = 1;
    }
    plan.fill_used = need > 0;
    std::sort(plan.fill.begin(), plan.fill.end());
  }

  for (Index p = 0; p < total; ++p) {
    if (plan.flags[static_cast<std::size_t>(p)])
      plan.masked.push_back(static_cast<int>(p));
    else
      plan.visible.push_back(static_cast<int>(p));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Waveform augmentation: a short random FIR coloring followed by additive
// noise at a random SNR. Off by default; enable per profile.
// ---------------------------------------------------------------------------

struct AugmentConfig {
  bool enabled = false;
  double snr_lo_db = 25.0;
  double snr_hi_db = 40.0;
  int fir_taps = 5;
};

inline Waveform augment(const Waveform& w, const AugmentConfig& cfg, Rng rng) {
  if (!cfg.enabled) return w;
  if (w.size() <= 0) throw ContractError("augment: empty waveform");
  std::vector<double> taps(static_cast<std::size_t>(cfg.fir_taps));
  taps[0] = 1.0;
  for (int k = 1; k < cfg.fir_taps; ++k)
    taps[static_cast<std::size_t>(k)] = 0.35 / k * rng.normal();
  double norm = 0.0;
  for (double t : taps) norm += t * t;
  norm = std::sqrt(norm);
  for (double& t : taps) t /= norm;

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = Vecf::Zero(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    double acc = 0.0;
    for (int k = 0; k < cfg.fir_taps; ++k)
      if (i - k >= 0) acc += taps[static_cast<std::size_t>(k)] * w.samples(i - k);
    out.samples(i) = static_cast<float>(acc);
  }

  const double snr_db = rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db);
  const double sig_rms = std::sqrt(
      static_cast<double>(out.samples.squaredNorm()) / static_cast<double>(out.size()));
  const double noise_rms = sig_rms / std::pow(10.0, snr_db / 20.0);
  for (Index i = 0; i < out.size(); ++i)
    out.samples(i) += static_cast<float>(noise_rms * rng.normal());
  return out;
}

}  // namespace sastnet

#endif  // SASTNET_FEATURES_HPP_
