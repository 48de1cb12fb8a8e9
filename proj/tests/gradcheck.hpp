// Central-difference gradient checking against the tape, in double.

#ifndef SASTNET_TESTS_GRADCHECK_HPP_
#define SASTNET_TESTS_GRADCHECK_HPP_

#include <functional>
#include <vector>

#include "sastnet/graph.hpp"

namespace sastnet::testing {

// Builds a scalar loss from leaves created from `inputs`, then compares the
// tape gradient of every input element against central differences.
// Returns the worst relative error max(|a-n| / max(1, |a|, |n|)).
inline double gradcheck(
    const std::function<int(Tape<double>&, const std::vector<int>&)>& build,
    std::vector<Matd> inputs, double h = 1e-5) {
  // Analytic pass.
  std::vector<Matd> analytic;
  {
    Tape<double> t;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const auto& m : inputs) ids.push_back(t.leaf(m));
    const int loss = build(t, ids);
    t.backward(loss);
    for (int id : ids) analytic.push_back(t.grad(id));
  }
  const auto eval = [&](const std::vector<Matd>& xs) {
    Tape<double> t;
    std::vector<int> ids;
    ids.reserve(xs.size());
    for (const auto& m : xs) ids.push_back(t.leaf(m));
    return t.val(build(t, ids))(0, 0);
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Index i = 0; i < inputs[k].rows(); ++i)
      for (Index j = 0; j < inputs[k].cols(); ++j) {
        auto plus = inputs;
        auto minus = inputs;
        plus[k](i, j) += h;
        minus[k](i, j) -= h;
        const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
        const double a = analytic[k](i, j);
        const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
        worst = std::max(worst, std::abs(a - numeric) / denom);
      }
  }
  return worst;
}

inline Matd random_mat(Index r, Index c, Rng& rng, double scale = 1.0) {
  Matd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace sastnet::testing

#endif  // SASTNET_TESTS_GRADCHECK_HPP_
