// Tape op tests: every op is gradient-checked against central differences,
// plus worked values for the loss primitives.

#include <doctest.h>

#include "gradcheck.hpp"

using namespace sastnet;
using sastnet::testing::gradcheck;
using sastnet::testing::random_mat;

namespace {
constexpr double kTol = 1e-6;
}

TEST_CASE("matmul forward and gradient") {
  Rng rng(1);
  const auto a = random_mat(3, 4, rng);
  const auto b = random_mat(4, 2, rng);
  {
    Tape<double> t;
    const int id = ops::matmul(t, t.constant(a), t.constant(b));
    CHECK((t.val(id) - a * b).cwiseAbs().maxCoeff() < 1e-12);
  }
  const double err = gradcheck(
      [](Tape<double>& t, const std::vector<int>& ids) {
        return ops::mean_all(t, ops::matmul(t, ids[0], ids[1]));
      },
      {a, b});
  CHECK(err < kTol);
}

TEST_CASE("matmul_nt gradient") {
  Rng rng(2);
  const double err = gradcheck(
      [](Tape<double>& t, const std::vector<int>& ids) {
        return ops::mean_all(t, ops::matmul_nt(t, ids[0], ids[1]));
      },
      {random_mat(3, 5, rng), random_mat(4, 5, rng)});
  CHECK(err < kTol);
}

TEST_CASE("elementwise binary ops gradient") {
  Rng rng(3);
  for (int which = 0; which < 3; ++which) {
    const double err = gradcheck(
        [which](Tape<double>& t, const std::vector<int>& ids) {
          int y = 0;
          if (which == 0) y = ops::add(t, ids[0], ids[1]);
          if (which == 1) y = ops::sub(t, ids[0], ids[1]);
          if (which == 2) y = ops::hadamard(t, ids[0], ids[1]);
          return ops::mean_all(t, ops::square(t, y));
        },
        {random_mat(4, 3, rng), random_mat(4, 3, rng)});
    CHECK(err < kTol);
  }
}

TEST_CASE("broadcast ops gradient") {
  Rng rng(4);
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              return ops::mean_all(t, ops::square(t, ops::add_rowvec(t, ids[0], ids[1])));
            },
            {random_mat(5, 4, rng), random_mat(1, 4, rng)}) < kTol);
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              return ops::mean_all(t, ops::square(t, ops::broadcast_row(t, ids[0], 6)));
            },
            {random_mat(1, 4, rng)}) < kTol);
}

TEST_CASE("unary ops gradient") {
  Rng rng(5);
  const auto x = random_mat(4, 4, rng);
  const auto pos = (random_mat(4, 4, rng).array().abs() + 0.5).matrix().eval();
  using Build = std::function<int(Tape<double>&, const std::vector<int>&)>;
  const std::vector<std::pair<Build, Matd>> cases = {
      {[](Tape<double>& t, const std::vector<int>& ids) {
         return ops::mean_all(t, ops::gelu(t, ids[0]));
       },
       x},
      {[](Tape<double>& t, const std::vector<int>& ids) {
         return ops::mean_all(t, ops::tanh_op(t, ids[0]));
       },
       x},
      {[](Tape<double>& t, const std::vector<int>& ids) {
         return ops::mean_all(t, ops::square(t, ids[0]));
       },
       x},
      {[](Tape<double>& t, const std::vector<int>& ids) {
         return ops::mean_all(t, ops::log_op(t, ids[0]));
       },
       pos},
      {[](Tape<double>& t, const std::vector<int>& ids) {
         return ops::mean_all(t, ops::sqrt_op(t, ids[0]));
       },
       pos},
      {[](Tape<double>& t, const std::vector<int>& ids) {
         return ops::mean_all(t, ops::reciprocal(t, ids[0]));
       },
       pos},
      {[](Tape<double>& t, const std::vector<int>& ids) {
         return ops::mean_all(t, ops::scale(t, ops::add_scalar(t, ids[0], 1.5), -2.0));
       },
       x}};
  for (const auto& [build, input] : cases) CHECK(gradcheck(build, {input}) < kTol);
}

TEST_CASE("relu gradient away from the kink, zero at the kink") {
  Matd x(2, 2);
  x << 1.0, -1.0, 2.0, -2.0;
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              return ops::mean_all(t, ops::relu(t, ids[0]));
            },
            {x}) < kTol);
  // Exactly at zero, the chosen subgradient is zero.
  Tape<double> t;
  const int leaf = t.leaf(Matd::Zero(1, 1));
  t.backward(ops::sum_all(t, ops::relu(t, leaf)));
  CHECK(t.grad(leaf)(0, 0) == 0.0);
}

TEST_CASE("softmax rows sum to one and its gradient is exact") {
  Rng rng(6);
  const auto x = random_mat(3, 5, rng);
  Tape<double> t;
  const int sm = ops::softmax_rows(t, t.constant(x));
  for (Index r = 0; r < 3; ++r)
    CHECK(t.val(sm).row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
  const auto w = random_mat(3, 5, rng);
  CHECK(gradcheck(
            [&w](Tape<double>& t2, const std::vector<int>& ids) {
              return ops::mean_all(
                  t2, ops::hadamard(t2, ops::softmax_rows(t2, ids[0]), t2.constant(w)));
            },
            {x}) < kTol);
}

TEST_CASE("layer_norm normalizes rows and its gradient is exact") {
  Rng rng(7);
  const auto x = random_mat(4, 6, rng);
  const auto gm = (random_mat(1, 6, rng) * 0.1).eval();
  const auto bt = (random_mat(1, 6, rng) * 0.1).eval();
  Tape<double> t;
  const int y = ops::layer_norm(t, t.constant(x), t.constant(Matd::Ones(1, 6)),
                                t.constant(Matd::Zero(1, 6)));
  for (Index r = 0; r < 4; ++r) {
    CHECK(t.val(y).row(r).mean() == doctest::Approx(0.0).epsilon(1e-10));
    const double var = t.val(y).row(r).array().square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  const auto w = random_mat(4, 6, rng);
  CHECK(gradcheck(
            [&w](Tape<double>& t2, const std::vector<int>& ids) {
              return ops::mean_all(
                  t2, ops::hadamard(t2, ops::layer_norm(t2, ids[0], ids[1], ids[2]),
                                    t2.constant(w)));
            },
            {x, (Matd::Ones(1, 6) + gm).eval(), bt}) < 1e-5);
}

TEST_CASE("reduction and reshape ops gradient") {
  Rng rng(8);
  const auto x = random_mat(6, 5, rng);
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              return ops::sum_all(t, ops::square(t, ops::mean_rows(t, ids[0])));
            },
            {x}) < kTol);
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              const int s = ops::slice_rows(t, ids[0], 1, 3);
              const int c = ops::slice_cols(t, s, 2, 2);
              return ops::mean_all(t, ops::square(t, ops::transpose(t, c)));
            },
            {x}) < kTol);
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              const int c = ops::concat_rows(t, {ids[0], ids[1]});
              const int d = ops::concat_cols(t, {c, c});
              return ops::mean_all(t, ops::square(t, d));
            },
            {random_mat(2, 3, rng), random_mat(4, 3, rng)}) < kTol);
}

TEST_CASE("gather and scatter gradient") {
  Rng rng(9);
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              // Repeated gather index exercises accumulation.
              return ops::mean_all(
                  t, ops::square(t, ops::gather_rows(t, ids[0], {0, 2, 2, 4})));
            },
            {random_mat(5, 3, rng)}) < kTol);
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              const int s = ops::scatter_rows(t, ids[0], {1, 3}, ids[1]);
              return ops::mean_all(t, ops::square(t, s));
            },
            {random_mat(5, 3, rng), random_mat(2, 3, rng)}) < kTol);
  Tape<double> t;
  const int base = t.constant(Matd::Zero(4, 2));
  const int rows = t.constant(Matd::Ones(2, 2));
  CHECK_THROWS_AS(ops::scatter_rows(t, base, {1, 1}, rows), ContractError);
}

TEST_CASE("unfold1d matches manual windows and its gradient is exact") {
  Rng rng(10);
  const auto x = random_mat(9, 2, rng);
  Tape<double> t;
  const int u = ops::unfold1d(t, t.constant(x), 3, 2);
  CHECK(t.val(u).rows() == 4);
  CHECK(t.val(u).cols() == 6);
  CHECK(t.val(u)(1, 2) == x(3, 0));  // window 1 starts at row 2, tap 1, ch 0
  CHECK(gradcheck(
            [](Tape<double>& t2, const std::vector<int>& ids) {
              return ops::mean_all(t2, ops::square(t2, ops::unfold1d(t2, ids[0], 3, 2)));
            },
            {x}) < kTol);
}

TEST_CASE("patchify_op matches the value-level patchify and back-propagates") {
  Rng rng(11);
  const auto x = random_mat(10, 6, rng);
  Tape<double> t;
  const int p = ops::patchify_op(t, t.constant(x), 4, 3);
  CHECK(t.val(p).rows() == 3 * 2);
  CHECK(t.val(p).cols() == 12);
  CHECK(gradcheck(
            [](Tape<double>& t2, const std::vector<int>& ids) {
              return ops::mean_all(t2, ops::square(t2, ops::patchify_op(t2, ids[0], 4, 3)));
            },
            {x}) < kTol);
}

TEST_CASE("cross entropy worked values") {
  // Uniform logits over four classes cost ln 4.
  Tape<double> t;
  const int l1 = t.constant(Matd::Zero(1, 4));
  CHECK(t.val(ops::cross_entropy(t, l1, 2))(0, 0) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  Matd l2m(1, 3);
  l2m << 2.0, 0.0, 0.0;
  const int l2 = t.constant(l2m);
  CHECK(t.val(ops::cross_entropy(t, l2, 0))(0, 0) ==
        doctest::Approx(std::log(1.0 + 2.0 * std::exp(-2.0))).epsilon(1e-12));
}

TEST_CASE("cross entropy gradient and invalid label") {
  Rng rng(12);
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              return ops::cross_entropy(t, ids[0], 1);
            },
            {random_mat(1, 5, rng)}) < kTol);
  Tape<double> t;
  const int l = t.constant(Matd::Zero(1, 3));
  CHECK_THROWS_AS(ops::cross_entropy(t, l, 3), ContractError);
}

TEST_CASE("add_weighted and mse compose") {
  Rng rng(13);
  CHECK(gradcheck(
            [](Tape<double>& t, const std::vector<int>& ids) {
              const int a = ops::mse(t, ids[0], ids[1]);
              const int b = ops::mean_all(t, ops::square(t, ids[0]));
              return ops::add_weighted(t, {a, b}, {0.7, 0.3});
            },
            {random_mat(3, 3, rng), random_mat(3, 3, rng)}) < kTol);
}

TEST_CASE("backward validates the root") {
  Tape<double> t;
  const int leaf = t.leaf(Matd::Ones(2, 2));
  CHECK_THROWS_AS(t.backward(leaf), ContractError);
  const int c = t.constant(Matd::Ones(1, 1));
  CHECK_THROWS_AS(t.backward(c), ContractError);
}

TEST_CASE("constants do not accumulate gradients") {
  Tape<double> t;
  const int c = t.constant(Matd::Ones(2, 2));
  const int leaf = t.leaf(Matd::Ones(2, 2));
  const int loss = ops::mean_all(t, ops::hadamard(t, c, leaf));
  t.backward(loss);
  CHECK(t.has_grad(leaf));
  CHECK_FALSE(t.has_grad(c));
}

TEST_CASE("a two-layer network gradcheck end to end") {
  Rng rng(14);
  const auto x = random_mat(2, 4, rng);
  const auto w1 = random_mat(4, 8, rng, 0.5);
  const auto b1 = random_mat(1, 8, rng, 0.1);
  const auto w2 = random_mat(8, 3, rng, 0.5);
  const double err = gradcheck(
      [](Tape<double>& t, const std::vector<int>& ids) {
        const int h = ops::gelu(t, ops::add_rowvec(t, ops::matmul(t, ids[0], ids[1]), ids[2]));
        const int logits = ops::matmul(t, h, ids[3]);
        const int l0 = ops::cross_entropy(t, ops::slice_rows(t, logits, 0, 1), 0);
        const int l1 = ops::cross_entropy(t, ops::slice_rows(t, logits, 1, 1), 2);
        return ops::add_weighted(t, {l0, l1}, {0.5, 0.5});
      },
      {x, w1, b1, w2});
  CHECK(err < kTol);
}
