// Classifier and joint-loss tests: attentive statistics pooling on constant
// and permuted frames, per-task logit widths, cross-entropy worked values
// and bounds, the adaptive loss-weighting formula (worked values, the
// stationary point, positivity under optimization), and gradient checks for
// both losses against central finite differences.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gradcheck.hpp"
#include "sastnet/classifier.hpp"
#include "sastnet/corpus.hpp"

using namespace sastnet;
using sastnet::testing::gradcheck;
using sastnet::testing::random_mat;

namespace {

ClassifierConfig tiny_cls(Index n_classes) {
  ClassifierConfig cfg;
  cfg.d_in = 8;
  cfg.attn_hidden = 8;
  cfg.mlp_hidden = 12;
  cfg.n_classes = n_classes;
  return cfg;
}

Matf random_frames(Index rows, Index cols, Rng& rng) {
  Matf m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<float>(0.5 * rng.normal());
  return m;
}

}  // namespace

TEST_CASE("pooling: constant frames give the frame value and zero spread") {
  // Four identical frames: softmax weights are exactly 1/4 each, so the
  // weighted mean reproduces the frame and the weighted variance is exactly
  // zero (power-of-two weights keep float arithmetic exact).
  ParamStore<float> ps(Rng(30).derive("cls-const"));
  const ClassifierM cls(ps, "cls", tiny_cls(4));

  Matf frames(4, 8);
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 8; ++c)
      frames(r, c) = 0.25f * static_cast<float>(c) - 0.5f;

  Tape<float> t;
  Binding<float> bind;
  Matf weights;
  cls(t, bind, ps, t.constant(frames), &weights);

  REQUIRE(weights.rows() == 1);
  REQUIRE(weights.cols() == 4);
  for (Index c = 0; c < 4; ++c) CHECK(weights(0, c) == 0.25f);

  // Reconstruct the pooled statistics the same way the head receives them.
  const Matf mean = weights * frames;
  for (Index c = 0; c < 8; ++c) CHECK(mean(0, c) == frames(0, c));
  const Matf diff = frames - mean.replicate(4, 1);
  const Matf var = weights * diff.cwiseProduct(diff).eval();
  for (Index c = 0; c < 8; ++c) CHECK(std::sqrt(var(0, c)) == 0.0f);
}

TEST_CASE("classify: logit widths match the four task heads") {
  Rng rng(31);
  for (const Task task : {Task::kVq, Task::kAux, Task::kDec, Task::kBin}) {
    ParamStore<float> ps(Rng(32).derive("cls-width", {static_cast<int>(task)}));
    const ClassifierM cls(ps, "cls", tiny_cls(n_classes(task)));
    Tape<float> t;
    Binding<float> bind;
    const int logits = cls(t, bind, ps, t.constant(random_frames(5, 8, rng)));
    CHECK(t.val(logits).rows() == 1);
    CHECK(t.val(logits).cols() == n_classes(task));
  }
  // 4 / 3 / 3 / 2, pinned.
  CHECK(n_classes(Task::kVq) == 4);
  CHECK(n_classes(Task::kAux) == 3);
  CHECK(n_classes(Task::kDec) == 3);
  CHECK(n_classes(Task::kBin) == 2);
}

TEST_CASE("classify: rejects malformed frame inputs") {
  ParamStore<float> ps(Rng(33).derive("cls-bad"));
  const ClassifierM cls(ps, "cls", tiny_cls(4));
  Rng rng(34);

  Tape<float> t;
  Binding<float> bind;
  const int wrong_width = t.constant(random_frames(5, 9, rng));
  CHECK_THROWS_AS(cls(t, bind, ps, wrong_width), ContractError);
  const int empty = t.constant(Matf(0, 8));
  CHECK_THROWS_AS(cls(t, bind, ps, empty), ContractError);
  Matf inf_frames = random_frames(3, 8, rng);
  inf_frames(1, 2) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(cls(t, bind, ps, t.constant(inf_frames)), ContractError);
}

TEST_CASE("classify: argmax is invariant to a constant logit shift") {
  ParamStore<float> ps(Rng(35).derive("cls-shift"));
  const ClassifierM cls(ps, "cls", tiny_cls(4));
  Rng rng(36);

  Tape<float> t;
  Binding<float> bind;
  const int logits = cls(t, bind, ps, t.constant(random_frames(6, 8, rng)));
  const Matf base = t.val(logits);
  const Index pred = argmax_row(base);
  for (const float shift : {-3.25f, 0.5f, 11.0f}) {
    const Matf shifted = (base.array() + shift).matrix();
    CHECK(argmax_row(shifted) == pred);
  }
}

TEST_CASE("classify: permuting frames only acts through attention weights") {
  // Force uniform attention by zeroing the attention score path; pooled mean
  // and variance are then symmetric functions of the frames, so any
  // permutation leaves the logits unchanged.
  ParamStore<float> ps(Rng(37).derive("cls-perm"));
  const ClassifierM cls(ps, "cls", tiny_cls(3));
  ps.entry(ps.find("cls.attn0.w")).value.setZero();
  ps.entry(ps.find("cls.attn1.w")).value.setZero();

  Rng rng(38);
  const Matf frames = random_frames(6, 8, rng);
  Matf permuted(6, 8);
  const std::vector<Index> order{4, 0, 5, 2, 1, 3};
  for (Index r = 0; r < 6; ++r) permuted.row(r) = frames.row(order[r]);

  Tape<float> ta;
  Binding<float> ba;
  const Matf la = ta.val(cls(ta, ba, ps, ta.constant(frames)));
  Tape<float> tb;
  Binding<float> bb;
  const Matf lb = tb.val(cls(tb, bb, ps, tb.constant(permuted)));

  REQUIRE(la.cols() == lb.cols());
  for (Index c = 0; c < la.cols(); ++c)
    CHECK(la(0, c) == doctest::Approx(lb(0, c)).epsilon(1e-5));
}

TEST_CASE("cls_loss: worked values, bounds, and the one-hot limit") {
  Tape<double> t;

  Matd uniform(1, 4);
  uniform.setConstant(0.7);
  const int lu = cls_loss(t, t.leaf(uniform), 2);
  CHECK(t.val(lu)(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Matd spread(1, 3);
  spread << 2.0, 0.0, 0.0;
  const int ls = cls_loss(t, t.leaf(spread), 0);
  CHECK(t.val(ls)(0, 0) ==
        doctest::Approx(std::log(1.0 + 2.0 * std::exp(-2.0))).epsilon(1e-12));

  // Growing margin toward the true class drives the loss to zero from above.
  double prev = t.val(ls)(0, 0);
  for (const double margin : {5.0, 10.0, 20.0, 40.0}) {
    Matd m(1, 3);
    m << margin, 0.0, 0.0;
    const double loss = t.val(cls_loss(t, t.leaf(m), 0))(0, 0);
    CHECK(loss >= 0.0);
    CHECK(loss < prev);
    prev = loss;
  }
  CHECK(prev < 1e-8);

  // Out-of-range labels are rejected.
  CHECK_THROWS_AS(cls_loss(t, t.leaf(spread), 3), ContractError);
  CHECK_THROWS_AS(cls_loss(t, t.leaf(spread), -1), ContractError);
}

TEST_CASE("cls_loss: gradient check at 20 random points") {
  Rng rng(39);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int label = static_cast<int>(rng.randint(5));
    const auto build = [&](Tape<double>& t, const std::vector<int>& leaves) {
      return cls_loss(t, leaves[0], label);
    };
    worst = std::max(worst, gradcheck(build, {random_mat(1, 5, rng, 2.0)}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("awl: worked values hold in double precision") {
  // w = 1, both losses 0: only the regularizers remain -> 2 ln 2.
  {
    Tape<double> t;
    Matd one(1, 1), zero(1, 1);
    one.setOnes();
    zero.setZero();
    const int total = awl_formula(t, t.constant(zero), t.constant(zero),
                                  t.leaf(one), t.leaf(one));
    CHECK(t.val(total)(0, 0) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }
  // w = 1 both, L_cls = 1, L_recon = 0.14 -> 0.5 * 1.14 + 2 ln 2.
  {
    Tape<double> t;
    Matd one(1, 1), lc(1, 1), lr(1, 1);
    one.setOnes();
    lc.setConstant(1.0);
    lr.setConstant(0.14);
    const int total = awl_formula(t, t.constant(lc), t.constant(lr),
                                  t.leaf(one), t.leaf(one));
    CHECK(t.val(total)(0, 0) ==
          doctest::Approx(0.5 * 1.14 + 2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(t.val(total)(0, 0) == doctest::Approx(1.9563).epsilon(1e-4));
  }
}

TEST_CASE("awl: stationary point of the classification weight at one") {
  // d/dw [L/(2w^2) + ln(1+w^2)] at w = 1, L = 1 is -1 + 1 = 0.
  Tape<double> t;
  Matd one(1, 1), lc(1, 1), lr(1, 1);
  one.setOnes();
  lc.setConstant(1.0);
  lr.setConstant(0.37);  // any finite value; it only moves its own weight
  const int u_cls = t.leaf(one);
  const int total = awl_formula(t, t.constant(lc), t.constant(lr), u_cls,
                                t.leaf(one));
  t.backward(total);
  CHECK(std::abs(t.grad(u_cls)(0, 0)) <= 1e-6);
}

TEST_CASE("awl: rejects non-finite losses") {
  Tape<float> t;
  Matf one(1, 1), nanv(1, 1), ok(1, 1);
  one.setOnes();
  nanv.setConstant(std::numeric_limits<float>::quiet_NaN());
  ok.setConstant(0.25f);
  const int u = t.leaf(one);
  CHECK_THROWS_AS(awl_formula(t, t.constant(nanv), t.constant(ok), u, u),
                  ContractError);
  Matf infv(1, 1);
  infv.setConstant(std::numeric_limits<float>::infinity());
  CHECK_THROWS_AS(awl_formula(t, t.constant(ok), t.constant(infv), u, u),
                  ContractError);
  Matf wide(1, 2);
  wide.setOnes();
  CHECK_THROWS_AS(awl_formula(t, t.leaf(wide), t.constant(ok), u, u),
                  ContractError);
}

TEST_CASE("awl: gradient check at 20 random points") {
  Rng rng(40);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto build = [&](Tape<double>& t, const std::vector<int>& leaves) {
      return awl_formula(t, leaves[0], leaves[1], leaves[2], leaves[3]);
    };
    // Losses are non-negative; raw weights stay away from zero where the
    // formula is singular.
    Matd lc = random_mat(1, 1, rng, 1.0);
    Matd lr = random_mat(1, 1, rng, 1.0);
    lc(0, 0) = std::abs(lc(0, 0));
    lr(0, 0) = std::abs(lr(0, 0));
    Matd uc = random_mat(1, 1, rng, 1.0);
    Matd ur = random_mat(1, 1, rng, 1.0);
    uc(0, 0) = 0.5 + std::abs(uc(0, 0));
    ur(0, 0) = 0.5 + std::abs(ur(0, 0));
    worst = std::max(worst, gradcheck(build, {lc, lr, uc, ur}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("awl: effective weights stay positive through 1000 steps") {
  ParamStore<float> ps(Rng(41).derive("awl-steps"));
  const AwlM awl(ps, "awl");
  OptimConfig opt;
  opt.lr = 5e-3;
  opt.weight_decay = 0.0;
  Rng rng(42);

  for (int step = 1; step <= 1000; ++step) {
    Tape<float> t;
    Binding<float> bind;
    Matf lc(1, 1), lr(1, 1);
    lc.setConstant(static_cast<float>(rng.uniform(0.0, 2.0)));
    lr.setConstant(static_cast<float>(rng.uniform(0.0, 2.0)));
    const int total = awl.combine(t, bind, ps, t.constant(lc), t.constant(lr));
    t.backward(total);
    ps.zero_grad();
    bind.accumulate(t, ps);
    adamw_step(ps, opt, step);

    const auto [w_cls, w_recon] = awl.weights(ps);
    CHECK(w_cls > 0.0);
    CHECK(w_recon > 0.0);
  }
  // The weights moved but stayed in a sane range.
  const auto [w_cls, w_recon] = awl.weights(ps);
  CHECK(w_cls > 0.05);
  CHECK(w_recon > 0.05);
  CHECK(w_cls < 20.0);
  CHECK(w_recon < 20.0);
}

TEST_CASE("classifier head: gradient flows end to end") {
  // Double-precision check through pooling + head via tape primitives built
  // from leaf parameters, mirroring ClassifierM's wiring exactly.
  Rng rng(43);
  const Index L = 5, d = 6, hidden = 7, classes = 3;
  const auto build = [&](Tape<double>& t, const std::vector<int>& leaves) {
    const int frames = leaves[0];
    const int scores =
        ops::add_rowvec(t, ops::matmul(t, ops::tanh_op(t, ops::add_rowvec(t, ops::matmul(t, frames, leaves[1]), leaves[2])), leaves[3]), leaves[4]);
    const int w = ops::softmax_rows(t, ops::transpose(t, scores));
    const int mean = ops::matmul(t, w, frames);
    const int diff = ops::sub(t, frames, ops::broadcast_row(t, mean, L));
    const int var = ops::matmul(t, w, ops::hadamard(t, diff, diff));
    const int stddev = ops::sqrt_guard(t, var);
    const int stats = ops::concat_cols(t, {mean, stddev});
    const int h = ops::gelu(t, ops::add_rowvec(t, ops::matmul(t, stats, leaves[5]), leaves[6]));
    const int logits = ops::add_rowvec(t, ops::matmul(t, h, leaves[7]), leaves[8]);
    return cls_loss(t, logits, 1);
  };
  const double worst = gradcheck(
      build, {random_mat(L, d, rng, 0.8), random_mat(d, hidden, rng, 0.4),
              random_mat(1, hidden, rng, 0.1), random_mat(hidden, 1, rng, 0.4),
              random_mat(1, 1, rng, 0.1), random_mat(2 * d, hidden, rng, 0.4),
              random_mat(1, hidden, rng, 0.1),
              random_mat(hidden, classes, rng, 0.4),
              random_mat(1, classes, rng, 0.1)});
  CHECK(worst < 1e-4);
}
