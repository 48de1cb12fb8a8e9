// Tests for fixed-length cropping, the patch grid, mask planning, and
// augmentation.

#include <doctest.h>

#include <set>

#include "sastnet/features.hpp"

using namespace sastnet;

namespace {

Waveform ramp_wave(Index n) {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(n);
  for (Index i = 0; i < n; ++i) w.samples(i) = static_cast<float>(i);
  return w;
}

}  // namespace

TEST_CASE("eval crop is centered") {
  const Waveform w = ramp_wave(50600);
  const Waveform c = pad_or_crop(w, 32800, CropMode::kEval, Rng(1));
  CHECK(c.size() == 32800);
  CHECK(c.samples(0) == 8900.0f);
  CHECK(c.samples(32799) == 8900.0f + 32799.0f);
}

TEST_CASE("train crop is uniform over valid offsets and seeded") {
  const Waveform w = ramp_wave(40000);
  const Waveform a = pad_or_crop(w, 32800, CropMode::kTrain, Rng(5));
  const Waveform b = pad_or_crop(w, 32800, CropMode::kTrain, Rng(5));
  CHECK(a.samples(0) == b.samples(0));
  CHECK(a.size() == 32800);
  const auto start = static_cast<Index>(a.samples(0));
  CHECK(start >= 0);
  CHECK(start <= 40000 - 32800);
  // Offsets vary across seeds.
  std::set<float> firsts;
  for (int s = 0; s < 16; ++s)
    firsts.insert(pad_or_crop(w, 32800, CropMode::kTrain, Rng(s)).samples(0));
  CHECK(firsts.size() > 4);
}

TEST_CASE("short inputs are repeat-padded by tiling") {
  const Waveform w = ramp_wave(1000);
  const Waveform p = pad_or_crop(w, 3500, CropMode::kEval, Rng(1));
  CHECK(p.size() == 3500);
  for (Index i = 0; i < p.size(); ++i)
    CHECK(p.samples(i) == w.samples(i % 1000));
}

TEST_CASE("exact-length input passes through") {
  const Waveform w = ramp_wave(32800);
  const Waveform p = pad_or_crop(w, 32800, CropMode::kEval, Rng(1));
  CHECK((p.samples - w.samples).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("patchify round trips exactly, ragged edges included") {
  Rng rng(31);
  for (auto [rows, cols] : std::vector<std::pair<Index, Index>>{
           {205, 64}, {128, 64}, {16, 16}, {30, 50}}) {
    Matf x(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        x(i, j) = static_cast<float>(rng.normal());
    const PatchGrid<float> g = patchify(x, 8, 8);
    CHECK(g.t_p == (rows + 7) / 8);
    CHECK(g.f_p == (cols + 7) / 8);
    CHECK(g.patches.rows() == g.t_p * g.f_p);
    CHECK(g.patches.cols() == 64);
    const Matf back = unpatchify(g);
    CHECK(back.rows() == rows);
    CHECK(back.cols() == cols);
    CHECK((back - x).cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("patch layout is time-major with row-major cells") {
  Matf x(16, 16);
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 16; ++j) x(i, j) = static_cast<float>(i * 100 + j);
  const PatchGrid<float> g = patchify(x, 8, 8);
  // Patch 1 is time row 0, channel block 1; its cell (0, 0) is x(0, 8).
  CHECK(g.patches(1, 0) == x(0, 8));
  // Patch 2 is time row 1, channel block 0; its cell (2, 3) is x(10, 3).
  CHECK(g.patches(2, 2 * 8 + 3) == x(10, 3));
}

TEST_CASE("mask plan worked example: square grid") {
  const MaskPlan plan = plan_mask(10, 10, 0.4, Rng(3));
  CHECK(plan.time_cols.size() == 2);
  CHECK(plan.freq_rows.size() == 2);
  CHECK(plan.masked_count() == 40);
  CHECK(plan.fill_used);
  CHECK(plan.fill.size() == 4);  // 36 in the union, 4 filled
  CHECK(plan.visible.size() == 60);
}

TEST_CASE("mask plan worked example: wide grid") {
  const MaskPlan plan = plan_mask(16, 8, 0.4, Rng(4));
  CHECK(plan.time_cols.size() == 3);
  CHECK(plan.freq_rows.size() == 1);
  CHECK(plan.masked_count() == 51);
  CHECK(plan.visible.size() == 77);
}

TEST_CASE("mask plan quantities stay within their quanta across a sweep") {
  Rng seeds(99);
  for (Index t = 4; t <= 16; t += 3)
    for (Index f = 4; f <= 16; f += 3)
      for (double r : {0.2, 0.4, 0.6}) {
        const MaskPlan plan = plan_mask(t, f, r, Rng(seeds.next_u64()));
        const double total = static_cast<double>(t * f);
        CHECK(std::abs(static_cast<double>(plan.masked_count()) - r * total) <= 1.0);
        CHECK(plan.time_cols.size() == static_cast<std::size_t>(std::floor(r / 2 * t)));
        CHECK(plan.freq_rows.size() == static_cast<std::size_t>(std::floor(r / 2 * f)));
        // Partition property.
        CHECK(plan.masked.size() + plan.visible.size() == static_cast<std::size_t>(t * f));
        for (int p : plan.masked) CHECK(plan.flags[static_cast<std::size_t>(p)] == 1);
        for (int p : plan.visible) CHECK(plan.flags[static_cast<std::size_t>(p)] == 0);
      }
}

TEST_CASE("mask plan covers whole lines") {
  const MaskPlan plan = plan_mask(12, 9, 0.4, Rng(7));
  for (int c : plan.time_cols)
    for (Index f = 0; f < 9; ++f)
      CHECK(plan.flags[static_cast<std::size_t>(c * 9 + f)] == 1);
  for (int r : plan.freq_rows)
    for (Index t = 0; t < 12; ++t)
      CHECK(plan.flags[static_cast<std::size_t>(t * 9 + r)] == 1);
}

TEST_CASE("mask plan is deterministic per seed and validates inputs") {
  const MaskPlan a = plan_mask(10, 10, 0.4, Rng(5));
  const MaskPlan b = plan_mask(10, 10, 0.4, Rng(5));
  CHECK(a.masked == b.masked);
  const MaskPlan c = plan_mask(10, 10, 0.4, Rng(6));
  CHECK(a.masked != c.masked);
  CHECK_THROWS_AS(plan_mask(0, 10, 0.4, Rng(1)), ContractError);
  CHECK_THROWS_AS(plan_mask(10, 10, 1.0, Rng(1)), ContractError);
  const MaskPlan zero = plan_mask(10, 10, 0.0, Rng(1));
  CHECK(zero.masked_count() == 0);
  CHECK(zero.visible.size() == 100);
}

TEST_CASE("augmentation is gated, seeded, and level-preserving") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(16000);
  Rng rng(41);
  for (Index i = 0; i < w.size(); ++i)
    w.samples(i) = static_cast<float>(0.2 * rng.normal());

  AugmentConfig off;
  const Waveform same = augment(w, off, Rng(1));
  CHECK((same.samples - w.samples).cwiseAbs().maxCoeff() == 0.0f);

  AugmentConfig on;
  on.enabled = true;
  const Waveform a = augment(w, on, Rng(2));
  const Waveform b = augment(w, on, Rng(2));
  CHECK(a.size() == w.size());
  CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0f);
  const double in_rms = std::sqrt(w.samples.squaredNorm() / w.size());
  const double out_rms = std::sqrt(a.samples.squaredNorm() / a.size());
  CHECK(out_rms == doctest::Approx(in_rms).epsilon(0.25));
}

TEST_CASE("model_log_mel has the configured geometry") {
  FeatureConfig cfg;
  Waveform w;
  w.sample_rate = 16000;
  w.samples = Vecf::Zero(32800);
  for (Index i = 0; i < w.size(); ++i)
    w.samples(i) = static_cast<float>(0.3 * std::sin(0.1 * static_cast<double>(i)));
  const Matf m = model_log_mel(w, cfg);
  CHECK(m.rows() == 205);
  CHECK(m.cols() == 64);
  CHECK(m.allFinite());
}
