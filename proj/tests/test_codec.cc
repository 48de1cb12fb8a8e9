// Tests for the simulated codec chain: identity at zero strength, linear
// distortion growth, quantizer properties, and silence preservation.

#include <doctest.h>

#include "sastnet/codec.hpp"

using namespace sastnet;

namespace {

Waveform make_utt(std::uint64_t seed, double head = 0.3, double voiced = 1.2,
                  double tail = 0.3) {
  UtteranceSpec spec;
  spec.utt_id = 5;
  spec.speaker_id = 2;
  spec.voiced_seconds = voiced;
  spec.head_silence_seconds = head;
  spec.tail_silence_seconds = tail;
  SynthConfig cfg;
  Rng base(seed);
  return synth_utterance(spec, cfg, base.derive("utt", {5}), base.derive("spk", {2}));
}

double spectral_distance(const Waveform& a, const Waveform& b) {
  const StftConfig cfg{512, 160};
  const MatC sa = stft(a.samples, cfg);
  const MatC sb = stft(b.samples, cfg);
  return (sa - sb).norm();
}

CodecProfile profile_with_strength(double s) {
  CodecProfile p;
  p.vq = VqKind::kMultiCodebook;
  p.aux = AuxKind::kSemanticDistill;
  p.dec = DecKind::kTime;
  p.strength = s;
  return p;
}

}  // namespace

TEST_CASE("strength zero is the identity") {
  const Waveform x = make_utt(101);
  const Rng rec(55);
  const Waveform y = apply_codec_sim(x, profile_with_strength(0.0), 9, rec);
  CHECK(y.sample_rate == x.sample_rate);
  CHECK(y.size() == x.size());
  CHECK((y.samples - x.samples).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("distortion grows linearly and monotonically with strength") {
  const Waveform x = make_utt(102);
  const Rng rec(56);
  double prev = 0.0;
  std::vector<double> dist;
  for (double s : {0.25, 0.5, 0.75, 1.0}) {
    const Waveform y = apply_codec_sim(x, profile_with_strength(s), 9, rec);
    const double d = spectral_distance(x, y);
    CHECK(d > prev);
    prev = d;
    dist.push_back(d);
  }
  // y - x = s * (d - x): distances scale linearly in s up to float rounding.
  CHECK(dist[1] / dist[3] == doctest::Approx(0.5).epsilon(2e-3));
  CHECK(dist[0] / dist[3] == doctest::Approx(0.25).epsilon(2e-3));
}

TEST_CASE("codec output is deterministic in all its keys") {
  const Waveform x = make_utt(103);
  const Rng rec(57);
  const CodecProfile p = profile_with_strength(0.6);
  const Waveform y1 = apply_codec_sim(x, p, 9, rec);
  const Waveform y2 = apply_codec_sim(x, p, 9, rec);
  CHECK((y1.samples - y2.samples).cwiseAbs().maxCoeff() == 0.0f);
  const Waveform y3 = apply_codec_sim(x, p, 10, rec);
  CHECK((y1.samples - y3.samples).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("different codec families leave different fingerprints") {
  const Waveform x = make_utt(104);
  const Rng rec(58);
  CodecProfile a = profile_with_strength(0.6);
  CodecProfile b = a;
  b.vq = VqKind::kSingleCodebook;
  CodecProfile c = a;
  c.aux = AuxKind::kDisentangle;
  CodecProfile d = a;
  d.dec = DecKind::kFreq;
  const Waveform ya = apply_codec_sim(x, a, 9, rec);
  const Waveform yb = apply_codec_sim(x, b, 9, rec);
  const Waveform yc = apply_codec_sim(x, c, 9, rec);
  const Waveform yd = apply_codec_sim(x, d, 9, rec);
  CHECK(spectral_distance(ya, yb) > 1e-3);
  CHECK(spectral_distance(ya, yc) > 1e-3);
  CHECK(spectral_distance(ya, yd) > 1e-3);
}

TEST_CASE("residual refinement never increases quantization error") {
  Rng rng(200);
  Matf shape(40, 24);
  for (Index i = 0; i < shape.rows(); ++i)
    for (Index j = 0; j < shape.cols(); ++j)
      shape(i, j) = static_cast<float>(2.5 * rng.normal());
  CodecSimConfig cfg;
  const Rng profile_rng(77);
  const Matf mvq = quantize_shape(shape, VqKind::kMultiCodebook, cfg, profile_rng);
  const Matf svq = quantize_shape(shape, VqKind::kSingleCodebook, cfg, profile_rng);
  // Same stage-1 codebook; the stage-2 codebook contains the zero vector, so
  // per-row error cannot exceed the single-stage error.
  for (Index i = 0; i < shape.rows(); ++i) {
    const float e_mvq = (mvq.row(i) - shape.row(i)).squaredNorm();
    const float e_svq = (svq.row(i) - shape.row(i)).squaredNorm();
    CHECK(e_mvq <= e_svq + 1e-6f);
  }
}

TEST_CASE("scalar quantizer snaps to its grid") {
  Rng rng(201);
  Matf shape(10, 24);
  for (Index i = 0; i < shape.rows(); ++i)
    for (Index j = 0; j < shape.cols(); ++j)
      shape(i, j) = static_cast<float>(3.0 * rng.normal());
  CodecSimConfig cfg;
  const Matf q = quantize_shape(shape, VqKind::kScalar, cfg, Rng(1));
  for (Index i = 0; i < q.rows(); ++i)
    for (Index j = 0; j < q.cols(); ++j) {
      const float ratio = q(i, j) / static_cast<float>(cfg.scalar_step);
      CHECK(std::abs(ratio - std::round(ratio)) < 1e-4f);
    }
}

TEST_CASE("spoofing preserves the silence structure") {
  const Waveform x = make_utt(105, 0.5, 1.0, 0.5);
  const Rng rec(59);
  for (auto dec : {DecKind::kTime, DecKind::kFreq}) {
    CodecProfile p = profile_with_strength(0.6);
    p.dec = dec;
    const Waveform y = apply_codec_sim(x, p, 9, rec);
    CHECK(std::abs(silence_proportion(y) - silence_proportion(x)) < 0.06);
    const Waveform tx = trim_silence(x);
    const Waveform ty = trim_silence(y);
    CHECK(std::abs(tx.size() - ty.size()) <= 3 * 400);
  }
}

TEST_CASE("the fingerprint reaches into silence but stays below the trim threshold") {
  const Waveform x = make_utt(106, 0.6, 1.0, 0.6);
  const Rng rec(60);
  const Waveform y = apply_codec_sim(x, profile_with_strength(0.8), 9, rec);
  // Head silence region, away from the voiced boundary.
  const Index n = static_cast<Index>(0.4 * 16000);
  const auto rms_db = [&](const Vecf& v) {
    return amplitude_to_db(std::sqrt(v.squaredNorm() / static_cast<double>(v.size())));
  };
  const double bona_db = rms_db(x.samples.head(n));
  const double spoof_db = rms_db(y.samples.head(n));
  CHECK(spoof_db > bona_db + 3.0);  // audible-to-models fingerprint
  CHECK(spoof_db < -50.0);          // still silent for the trimmer
}

TEST_CASE("codec rejects invalid inputs") {
  const Waveform x = make_utt(107);
  CHECK_THROWS_AS(apply_codec_sim(x, profile_with_strength(1.5), 9, Rng(1)),
                  ContractError);
  Waveform empty;
  empty.samples = Vecf(0);
  CHECK_THROWS_AS(apply_codec_sim(empty, profile_with_strength(0.5), 9, Rng(1)),
                  ContractError);
}

TEST_CASE("profile ids are readable and distinct") {
  CodecProfile p = profile_with_strength(0.6);
  CHECK(p.id() == "mvq-sd-time@0.60");
  p.vq = VqKind::kScalar;
  p.aux = AuxKind::kDisentangle;
  p.dec = DecKind::kFreq;
  CHECK(p.id() == "sq-dis-freq@0.60");
}
