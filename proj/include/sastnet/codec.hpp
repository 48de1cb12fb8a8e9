// sastnet/codec.hpp
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

#ifndef SASTNET_CODEC_HPP_
#define SASTNET_CODEC_HPP_

#include <string>

#include "sastnet/audio.hpp"
#include "sastnet/dsp.hpp"

namespace sastnet {

// Simulated codec families. Together with the decoder domain they determine
// the fingerprint a spoofed utterance carries.
enum class VqKind { kMultiCodebook, kSingleCodebook, kScalar };
enum class AuxKind { kNone, kSemanticDistill, kDisentangle };
enum class DecKind { kTime, kFreq };

inline const char* to_string(VqKind k) {
  switch (k) {
    case VqKind::kMultiCodebook: return "mvq";
    case VqKind::kSingleCodebook: return "svq";
    case VqKind::kScalar: return "sq";
  }
  return "?";
}
inline const char* to_string(AuxKind k) {
  switch (k) {
    case AuxKind::kNone: return "none";
    case AuxKind::kSemanticDistill: return "sd";
    case AuxKind::kDisentangle: return "dis";
  }
  return "?";
}
inline const char* to_string(DecKind k) {
  switch (k) {
    case DecKind::kTime: return "time";
    case DecKind::kFreq: return "freq";
  }
  return "?";
}

struct CodecProfile {
  VqKind vq = VqKind::kMultiCodebook;
  AuxKind aux = AuxKind::kNone;
  DecKind dec = DecKind::kTime;
  double strength = 0.6;

  std::string id() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s-%s-%s@%.2f", to_string(vq),
                  to_string(aux), to_string(dec), strength);
    return std::string(buf);
  }
};

struct CodecSimConfig {
  int n_fft = 512;
  int hop = 160;
  int n_env_bands = 24;
  double sample_rate = 16000.0;
  int codebook_size = 8;
  double stage1_scale = 2.0;
  double stage2_scale = 0.8;
  double scalar_step = 1.5;
  double detune_factor = 1.05;
  int smooth_radius = 2;
  double clip_drive = 3.0;
  int griffin_lim_iters = 16;
  double floor_lo_db = -68.0;  // profile-keyed noise floor on quiet frames
  double floor_hi_db = -65.0;
  double quiet_frame_db = -60.0;
  float log_eps = 1e-10f;
};

namespace detail {

// Band analysis matrix A (bands x bins, rows average their triangle) and
// resynthesis matrix R (bins x bands, rows form a partition of unity).
struct EnvBasis {
  Matf analysis;
  Matf resynthesis;
};

inline EnvBasis make_env_basis(const CodecSimConfig& cfg) {
  const Matf fb = mel_filterbank(cfg.n_env_bands, cfg.n_fft, cfg.sample_rate,
                                 0.0, cfg.sample_rate / 2.0);
  const Index bands = fb.rows();
  const Index bins = fb.cols();
  EnvBasis basis;
  basis.analysis = fb;
  for (Index m = 0; m < bands; ++m) {
    const float s = fb.row(m).sum();
    if (s > 0.0f) basis.analysis.row(m) /= s;
  }
  basis.resynthesis = Matf::Zero(bins, bands);
  for (Index b = 0; b < bins; ++b) {
    const float s = fb.col(b).sum();
    if (s > 0.0f) {
      basis.resynthesis.row(b) = fb.col(b).transpose() / s;
    } else {
      // Bins outside every triangle follow their nearest band.
      Index nearest = 0;
      float best = -1.0f;
      for (Index m = 0; m < bands; ++m) {
        float peak = 0.0f;
        Index arg = 0;
        for (Index bb = 0; bb < bins; ++bb)
          if (fb(m, bb) > peak) { peak = fb(m, bb); arg = bb; }
        const float d = std::abs(static_cast<float>(arg - b));
        if (best < 0.0f || d < best) { best = d; nearest = m; }
      }
      basis.resynthesis(b, nearest) = 1.0f;
    }
  }
  return basis;
}

}  // namespace detail

// Codebooks are the fingerprint: they depend on the profile identity (and the
// corpus seed), never on the utterance, so every spoof of a profile shares
// the same quantization pattern.
inline Matf make_codebook(int entries, Index dim, double scale, bool include_zero,
                          Rng rng) {
  Matf cb(entries, dim);
  for (Index i = 0; i < cb.rows(); ++i)
    for (Index j = 0; j < dim; ++j)
      cb(i, j) = static_cast<float>(scale * rng.normal());
  if (include_zero) cb.row(0).setZero();
  return cb;
}

inline Index nearest_row(const Matf& codebook, const Eigen::RowVectorXf& v) {
  Index best = 0;
  float best_d = std::numeric_limits<float>::max();
  for (Index i = 0; i < codebook.rows(); ++i) {
    const float d = (codebook.row(i) - v).squaredNorm();
    if (d < best_d) { best_d = d; best = i; }
  }
  return best;
}

// Quantizes per-frame spectral shape rows. The multi-codebook variant refines
// with a residual stage whose codebook contains the zero vector, so its error
// never exceeds the single-stage error over the same first codebook.
inline Matf quantize_shape(const Matf& shape, VqKind kind,
                           const CodecSimConfig& cfg, const Rng& profile_rng) {
  Matf out(shape.rows(), shape.cols());
  if (kind == VqKind::kScalar) {
    const float step = static_cast<float>(cfg.scalar_step);
    out = (shape.array() / step).round() * step;
    return out;
  }
  const Matf cb1 = make_codebook(cfg.codebook_size, shape.cols(), cfg.stage1_scale,
                                 false, profile_rng.derive("stage1"));
  if (kind == VqKind::kSingleCodebook) {
    for (Index t = 0; t < shape.rows(); ++t)
      out.row(t) = cb1.row(nearest_row(cb1, shape.row(t)));
    return out;
  }
  const Matf cb2 = make_codebook(cfg.codebook_size, shape.cols(), cfg.stage2_scale,
                                 true, profile_rng.derive("stage2"));
  for (Index t = 0; t < shape.rows(); ++t) {
    const Index i = nearest_row(cb1, shape.row(t));
    const Eigen::RowVectorXf residual = shape.row(t) - cb1.row(i);
    const Index j = nearest_row(cb2, residual);
    out.row(t) = cb1.row(i) + cb2.row(j);
  }
  return out;
}

// Triangular moving average along time, the semantic-distillation fingerprint.
inline Matf smooth_rows_over_time(const Matf& x, int radius) {
  Matf out = Matf::Zero(x.rows(), x.cols());
  for (Index t = 0; t < x.rows(); ++t) {
    float wsum = 0.0f;
    for (int d = -radius; d <= radius; ++d) {
      const Index s = t + d;
      if (s < 0 || s >= x.rows()) continue;
      const float w = static_cast<float>(radius + 1 - std::abs(d));
      out.row(t) += w * x.row(s);
      wsum += w;
    }
    out.row(t) /= wsum;
  }
  return out;
}

// Resamples each frame's fine structure along frequency by `factor`,
// the disentanglement fingerprint (a slight spectral detune).
inline Matf detune_fine_structure(const Matf& fine, double factor) {
  Matf out(fine.rows(), fine.cols());
  const Index bins = fine.cols();
  for (Index t = 0; t < fine.rows(); ++t)
    for (Index b = 0; b < bins; ++b) {
      const double src = static_cast<double>(b) / factor;
      const auto lo = static_cast<Index>(std::floor(src));
      const Index hi = std::min(lo + 1, bins - 1);
      const auto frac = static_cast<float>(src - static_cast<double>(lo));
      out(t, b) = (1.0f - frac) * fine(t, std::min(lo, bins - 1)) + frac * fine(t, hi);
    }
  return out;
}

// Runs the full simulated codec chain and blends the decoded signal with the
// input: y = (1 - s) x + s d. At s = 0 the output is bitwise the input, and
// the spectral distance to the input is exactly linear in s.
inline Waveform apply_codec_sim(const Waveform& w, const CodecProfile& profile,
                                std::uint64_t corpus_seed, const Rng& record_rng,
                                const CodecSimConfig& cfg = {}) {
  if (w.size() <= 0) throw ContractError("apply_codec_sim: empty waveform");
  if (profile.strength < 0.0 || profile.strength > 1.0)
    throw ContractError("apply_codec_sim: strength must be in [0, 1]");

  Digest pd;
  pd.feed("codec-profile");
  pd.feed_u64(corpus_seed);
  pd.feed_i64(static_cast<std::int64_t>(profile.vq));
  pd.feed_i64(static_cast<std::int64_t>(profile.aux));
  pd.feed_i64(static_cast<std::int64_t>(profile.dec));
  const Rng profile_rng{pd.value()};

  const StftConfig stft_cfg{cfg.n_fft, cfg.hop};
  const MatC spec = stft(w.samples, stft_cfg);
  const Index frames = spec.rows();
  const Index bins = spec.cols();

  Matf logmag(frames, bins);
  for (Index t = 0; t < frames; ++t)
    for (Index b = 0; b < bins; ++b)
      logmag(t, b) = std::log(std::abs(spec(t, b)) + cfg.log_eps);

  const detail::EnvBasis basis = detail::make_env_basis(cfg);
  const Matf coeffs = logmag * basis.analysis.transpose();  // frames x bands
  const Vecf level = coeffs.rowwise().mean();
  Matf shape = coeffs.colwise() - level;

  // Quantize the shape only; the per-frame level is carried through
  // unchanged so silent regions stay silent.
  Matf shape_q = quantize_shape(shape, profile.vq, cfg, profile_rng);
  if (profile.aux == AuxKind::kSemanticDistill)
    shape_q = smooth_rows_over_time(shape_q, cfg.smooth_radius);

  Matf fine = logmag - (coeffs * basis.resynthesis.transpose());
  if (profile.aux == AuxKind::kDisentangle)
    fine = detune_fine_structure(fine, cfg.detune_factor);

  const Matf coeffs_q = shape_q.colwise() + level;
  const Matf logmag_q = coeffs_q * basis.resynthesis.transpose() + fine;
  Matf mag(frames, bins);
  for (Index t = 0; t < frames; ++t)
    for (Index b = 0; b < bins; ++b)
      mag(t, b) = std::max(std::exp(logmag_q(t, b)) - cfg.log_eps, 0.0f);

  Vecf decoded;
  if (profile.dec == DecKind::kTime) {
    MatC spec_q(frames, bins);
    for (Index t = 0; t < frames; ++t)
      for (Index b = 0; b < bins; ++b) {
        const float a = std::abs(spec(t, b));
        spec_q(t, b) = (a > 1e-12f) ? Cplx(spec(t, b) * (mag(t, b) / a))
                                    : Cplx(mag(t, b), 0.0f);
      }
    decoded = istft(spec_q, stft_cfg, w.size());
    const auto drive = static_cast<float>(cfg.clip_drive);
    decoded = (decoded.array() * drive).tanh() / drive;
  } else {
    Rng gl_rng = record_rng.derive("griffin-lim");
    decoded = griffin_lim(mag, stft_cfg, w.size(), cfg.griffin_lim_iters, gl_rng);
  }

  // Faint profile-keyed floor on quiet frames: the fingerprint reaches into
  // silence but stays far below the -50 dBFS trim threshold.
  Rng floor_level_rng = profile_rng.derive("floor");
  const double floor_db =
      floor_level_rng.uniform(cfg.floor_lo_db, cfg.floor_hi_db);
  const double color = floor_level_rng.uniform(0.2, 0.9);  // one-pole coefficient
  const double floor_amp = db_to_amplitude(floor_db);
  Rng noise_rng = record_rng.derive("floor-noise");
  Vecf floor_noise = Vecf::Zero(w.size());
  {
    const Index frame_len = cfg.n_fft;
    double prev = 0.0;
    for (Index start = 0; start < w.size(); start += frame_len) {
      const Index len = std::min<Index>(frame_len, w.size() - start);
      const double ms =
          static_cast<double>(w.samples.segment(start, len).squaredNorm()) /
          static_cast<double>(len);
      const bool quiet = amplitude_to_db(std::sqrt(ms)) < cfg.quiet_frame_db;
      for (Index i = 0; i < len; ++i) {
        prev = color * prev + (1.0 - color) * noise_rng.normal();
        if (quiet) floor_noise(start + i) = static_cast<float>(floor_amp * prev * 3.0);
      }
    }
  }

  const auto s = static_cast<float>(profile.strength);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = (1.0f - s) * w.samples + s * decoded + s * floor_noise;
  return out;
}

}  // namespace sastnet

#endif  // SASTNET_CODEC_HPP_
