// sastnet/core.hpp
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

#ifndef SASTNET_CORE_HPP_
#define SASTNET_CORE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sastnet {

using Index = Eigen::Index;

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matf = Mat<float>;
using Matd = Mat<double>;
using Vecf = Vec<float>;
using Vecd = Vec<double>;

// Error taxonomy mirrored by the CLI exit codes (2/3/4).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// 64-bit FNV-1a. Used for config/parameter/file digests and RNG substream
// derivation. Integrity checks only, nothing cryptographic.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), h);
}

class Digest {
 public:
  Digest& feed(const void* data, std::size_t n) {
    h_ = fnv1a64(data, n, h_);
    return *this;
  }
  Digest& feed(std::string_view s) { return feed(s.data(), s.size()); }
  Digest& feed_u64(std::uint64_t v) { return feed(&v, sizeof v); }
  Digest& feed_i64(std::int64_t v) { return feed(&v, sizeof v); }
  template <class S>
  Digest& feed_mat(const Mat<S>& m) {
    feed_i64(m.rows());
    feed_i64(m.cols());
    if (m.size() > 0) feed(m.data(), sizeof(S) * static_cast<std::size_t>(m.size()));
    return *this;
  }
  std::uint64_t value() const { return h_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h_));
    return std::string(buf);
  }

 private:
  std::uint64_t h_ = kFnvOffset;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. splitmix64 core with label-derived substreams so that
// every consumer (record, item, epoch, module) owns an independent stream and
// parallel evaluation order cannot change any draw.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::int64_t randint(std::int64_t n) {
    if (n <= 0) throw ContractError("Rng::randint requires n > 0");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v = 0;
    do {
      v = next_u64();
    } while (v >= limit);
    return static_cast<std::int64_t>(v % un);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(randint(static_cast<std::int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Pick k distinct indices from [0, n) in selection order.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k < 0 || k > n) throw ContractError("sample_without_replacement: k out of range");
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(randint(n - i));
      out.push_back(pool[j]);
      pool[j] = pool[static_cast<std::size_t>(n - i - 1)];
    }
    return out;
  }

  // Independent substream keyed by a label and integer qualifiers.
  Rng derive(std::string_view label,
             std::initializer_list<std::int64_t> keys = {}) const {
    Digest d;
    d.feed_u64(state_);
    d.feed(label);
    for (auto k : keys) d.feed_i64(k);
    return Rng(d.value());
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }
inline double amplitude_to_db(double amp) {
  return 20.0 * std::log10(std::max(amp, 1e-300));
}

}  // namespace sastnet

#endif  // SASTNET_CORE_HPP_
