// Fusion tests: query-side length rules across a grid of stream lengths,
// row-stochastic attention at every stage and layer, bit-transparent
// capture, stage/layer export with its binary container round trip, the
// uniform-attention case for a zero acoustic stream, and finite-difference
// gradient checks through the full three-stage composition.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "sastnet/fusion.hpp"

using namespace sastnet;
using sastnet::testing::gradcheck;
using sastnet::testing::random_mat;

namespace {

FusionConfig tiny_cfg() {
  FusionConfig cfg;
  cfg.d_sem = 10;
  cfg.d_ac = 12;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.d_ff = 32;
  cfg.n_layers = 2;
  return cfg;
}

Matf random_stream(Index rows, Index cols, Rng& rng) {
  Matf m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<float>(0.5 * rng.normal());
  return m;
}

}  // namespace

TEST_CASE("fusion: output lengths follow the query side across a grid") {
  const FusionConfig cfg = tiny_cfg();
  ParamStore<float> ps(Rng(5).derive("fusion-grid"));
  const FusionModule fuse(ps, "fusion", cfg);
  Rng rng(11);

  const std::vector<Index> sem_lengths{3, 5, 8, 13};
  const std::vector<Index> ac_lengths{4, 7, 8, 16};
  for (const Index ls : sem_lengths) {
    for (const Index la : ac_lengths) {
      Tape<float> t;
      Binding<float> bind;
      const int s = t.constant(random_stream(ls, cfg.d_sem, rng));
      const int a = t.constant(random_stream(la, cfg.d_ac, rng));
      const FusionOut out = fuse.forward(t, bind, ps, s, a);
      CHECK(t.val(out.o_sa).rows() == ls);
      CHECK(t.val(out.o_as).rows() == la);
      CHECK(t.val(out.o_fusion).rows() == la);
      CHECK(t.val(out.o_sa).cols() == cfg.d_model);
      CHECK(t.val(out.o_as).cols() == cfg.d_model);
      CHECK(t.val(out.o_fusion).cols() == cfg.d_model);
    }
  }

  // Wrong input widths are rejected.
  Tape<float> t;
  Binding<float> bind;
  const int s = t.constant(random_stream(4, cfg.d_sem + 1, rng));
  const int a = t.constant(random_stream(4, cfg.d_ac, rng));
  CHECK_THROWS_AS(fuse.forward(t, bind, ps, s, a), ContractError);
  CHECK_THROWS_AS(fuse.forward(t, bind, ps, a, s), ContractError);
}

TEST_CASE("fusion: attention rows are stochastic at every stage and layer") {
  const FusionConfig cfg = tiny_cfg();
  ParamStore<float> ps(Rng(6).derive("fusion-rows"));
  const FusionModule fuse(ps, "fusion", cfg);
  Rng rng(12);

  const Index ls = 6, la = 9;
  Tape<float> t;
  Binding<float> bind;
  const int s = t.constant(random_stream(ls, cfg.d_sem, rng));
  const int a = t.constant(random_stream(la, cfg.d_ac, rng));
  FusionCapture cap;
  fuse.forward(t, bind, ps, s, a, &cap);

  const struct {
    const std::vector<std::vector<Matf>>* stack;
    Index rows, cols;
  } stages[] = {
      {&cap.sem_attends_ac, ls, la},  // semantic queries over acoustic keys
      {&cap.ac_attends_sem, la, ls},  // acoustic queries over semantic keys
      {&cap.fusion, la, ls},          // fused queries over the semantic-query stream
  };
  for (const auto& st : stages) {
    REQUIRE(st.stack->size() == 2);
    for (const auto& layer : *st.stack) {
      REQUIRE(layer.size() == static_cast<std::size_t>(cfg.n_heads));
      for (const Matf& head : layer) {
        REQUIRE(head.rows() == st.rows);
        REQUIRE(head.cols() == st.cols);
        CHECK(head.minCoeff() >= 0.0f);
        for (Index r = 0; r < head.rows(); ++r)
          CHECK(std::abs(head.row(r).sum() - 1.0f) <= 1e-6f);
      }
    }
  }
}

TEST_CASE("fusion: capture does not perturb the forward pass") {
  const FusionConfig cfg = tiny_cfg();
  ParamStore<float> ps(Rng(7).derive("fusion-transparent"));
  const FusionModule fuse(ps, "fusion", cfg);
  Rng rng(13);

  const Matf sv = random_stream(5, cfg.d_sem, rng);
  const Matf av = random_stream(7, cfg.d_ac, rng);

  Tape<float> plain_t;
  Binding<float> plain_b;
  const FusionOut plain = fuse.forward(plain_t, plain_b, ps,
                                       plain_t.constant(sv),
                                       plain_t.constant(av));

  Tape<float> cap_t;
  Binding<float> cap_b;
  FusionCapture cap;
  const FusionOut captured = fuse.forward(cap_t, cap_b, ps, cap_t.constant(sv),
                                          cap_t.constant(av), &cap);

  const std::pair<int, int> outputs[] = {{plain.o_sa, captured.o_sa},
                                         {plain.o_as, captured.o_as},
                                         {plain.o_fusion, captured.o_fusion}};
  for (const auto& [lhs, rhs] : outputs) {
    const Matf& a = plain_t.val(lhs);
    const Matf& b = cap_t.val(rhs);
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0);
  }
}

TEST_CASE("fusion: export selects a stage and layer, rejecting bad requests") {
  const FusionConfig cfg = tiny_cfg();
  ParamStore<float> ps(Rng(8).derive("fusion-export"));
  const FusionModule fuse(ps, "fusion", cfg);
  Rng rng(14);

  Tape<float> t;
  Binding<float> bind;
  const int s = t.constant(random_stream(4, cfg.d_sem, rng));
  const int a = t.constant(random_stream(6, cfg.d_ac, rng));
  FusionCapture cap;
  fuse.forward(t, bind, ps, s, a, &cap);

  const AttentionMap map = export_attention(cap, FusionStage::kAcAttendsSem, 1);
  CHECK(map.stage == FusionStage::kAcAttendsSem);
  CHECK(map.layer == 1);
  REQUIRE(map.heads.size() == static_cast<std::size_t>(cfg.n_heads));
  for (std::size_t h = 0; h < map.heads.size(); ++h)
    CHECK(map.heads[h] == cap.ac_attends_sem[1][h]);

  CHECK_THROWS_AS(export_attention(cap, FusionStage::kFusion, 2), ContractError);
  CHECK_THROWS_AS(export_attention(cap, FusionStage::kFusion, -1), ContractError);
  const FusionCapture off;  // capture never enabled
  CHECK_THROWS_AS(export_attention(off, FusionStage::kSemAttendsAc, 0),
                  ContractError);
}

TEST_CASE("fusion: attention map container round trips with its sidecar") {
  const FusionConfig cfg = tiny_cfg();
  ParamStore<float> ps(Rng(9).derive("fusion-io"));
  const FusionModule fuse(ps, "fusion", cfg);
  Rng rng(15);

  Tape<float> t;
  Binding<float> bind;
  const int s = t.constant(random_stream(5, cfg.d_sem, rng));
  const int a = t.constant(random_stream(3, cfg.d_ac, rng));
  FusionCapture cap;
  fuse.forward(t, bind, ps, s, a, &cap);

  const AttentionMap map = export_attention(cap, FusionStage::kFusion, 0);
  const std::string path = "/tmp/sastnet_attn_map.bin";
  save_attention_map(path, map, "utt-0042");

  const LoadedAttentionMap back = load_attention_map(path);
  CHECK(back.map.stage == FusionStage::kFusion);
  CHECK(back.map.layer == 0);
  CHECK(back.utterance_id == "utt-0042");
  REQUIRE(back.map.heads.size() == map.heads.size());
  for (std::size_t h = 0; h < map.heads.size(); ++h)
    CHECK(back.map.heads[h] == map.heads[h]);  // byte-exact float round trip

  // Exported rows stay stochastic after the round trip.
  for (const Matf& head : back.map.heads)
    for (Index r = 0; r < head.rows(); ++r)
      CHECK(std::abs(head.row(r).sum() - 1.0f) <= 1e-6f);

  CHECK_THROWS_AS(load_attention_map("/tmp/sastnet_attn_missing.bin"), IoError);
  std::remove((path + ".txt").c_str());
  CHECK_THROWS_AS(load_attention_map(path), IoError);  // sidecar gone
  std::remove(path.c_str());
}

TEST_CASE("fusion: zero acoustic stream gives uniform first-layer attention") {
  // With a fresh module every bias is zero, so a zero acoustic input stays
  // zero through its projection and the first acoustic-query layer sees
  // all-equal logits: every weight must be 1/L_k over the semantic keys.
  const FusionConfig cfg = tiny_cfg();
  ParamStore<float> ps(Rng(10).derive("fusion-uniform"));
  const FusionModule fuse(ps, "fusion", cfg);
  Rng rng(16);

  const Index ls = 6, la = 5;
  Tape<float> t;
  Binding<float> bind;
  const int s = t.constant(random_stream(ls, cfg.d_sem, rng));
  const int a = t.constant(Matf::Zero(la, cfg.d_ac));
  FusionCapture cap;
  fuse.forward(t, bind, ps, s, a, &cap);

  const float expect = 1.0f / static_cast<float>(ls);
  for (const Matf& head : cap.ac_attends_sem[0]) {
    REQUIRE(head.rows() == la);
    REQUIRE(head.cols() == ls);
    for (Index r = 0; r < head.rows(); ++r)
      for (Index c = 0; c < head.cols(); ++c)
        CHECK(std::abs(head(r, c) - expect) <= 1e-6f);
  }
}

TEST_CASE("fusion: gradient reaches both input streams") {
  FusionConfig cfg = tiny_cfg();
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.d_sem = 6;
  cfg.d_ac = 6;
  ParamStore<double> ps(Rng(20).derive("fusion-gradin"));
  const FusionModuleT<double> fuse(ps, "fusion", cfg);
  Rng rng(21);

  const auto build = [&](Tape<double>& t, const std::vector<int>& leaves) {
    Binding<double> bind;
    const auto out = fuse.forward(t, bind, ps, leaves[0], leaves[1]);
    // A scalar read of one output coordinate, plus the mean so every frame
    // participates.
    return ops::add(t, ops::mean_all(t, out.o_fusion),
                    ops::mean_all(t, ops::slice_rows(t, out.o_sa, 0, 1)));
  };
  const double worst =
      gradcheck(build, {random_mat(3, 6, rng, 0.5), random_mat(4, 6, rng, 0.5)});
  CHECK(worst < 1e-3);
}

TEST_CASE("fusion: gradient check at random parameter coordinates") {
  FusionConfig cfg = tiny_cfg();
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.d_sem = 6;
  cfg.d_ac = 6;
  ParamStore<double> ps(Rng(22).derive("fusion-gradp"));
  const FusionModuleT<double> fuse(ps, "fusion", cfg);
  Rng rng(23);

  const Matd sv = random_mat(3, 6, rng, 0.5);
  const Matd av = random_mat(4, 6, rng, 0.5);

  const auto loss_value = [&]() {
    Tape<double> t;
    Binding<double> bind;
    const auto out = fuse.forward(t, bind, ps, t.constant(sv), t.constant(av));
    return t.val(ops::mean_all(t, out.o_fusion))(0, 0);
  };

  // Analytic gradients for every parameter.
  ps.zero_grad();
  {
    Tape<double> t;
    Binding<double> bind;
    const auto out = fuse.forward(t, bind, ps, t.constant(sv), t.constant(av));
    t.backward(ops::mean_all(t, out.o_fusion));
    bind.accumulate(t, ps);
  }

  // Ten random coordinates across the whole store, central differences.
  Rng pick(24);
  const double h = 1e-5;
  for (int i = 0; i < 10; ++i) {
    const auto e = static_cast<std::size_t>(
        pick.randint(static_cast<std::int64_t>(ps.entries.size())));
    auto& entry = ps.entries[e];
    const Index r = static_cast<Index>(pick.randint(entry.value.rows()));
    const Index c = static_cast<Index>(pick.randint(entry.value.cols()));

    const double saved = entry.value(r, c);
    entry.value(r, c) = saved + h;
    const double up = loss_value();
    entry.value(r, c) = saved - h;
    const double dn = loss_value();
    entry.value(r, c) = saved;

    const double numeric = (up - dn) / (2.0 * h);
    const double analytic =
        entry.grad.size() > 0 ? entry.grad(r, c) : 0.0;
    const double rel = std::abs(analytic - numeric) /
                       std::max({1.0, std::abs(analytic), std::abs(numeric)});
    INFO("entry " << entry.name << " (" << r << "," << c << ")");
    CHECK(rel < 1e-3);
  }
}
