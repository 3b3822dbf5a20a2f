#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>
#include <vector>

// Seeded, portable randomness for the whole laboratory.
//
// Every stochastic operation takes an explicit 64-bit seed; substreams are
// derived, never shared. The derivation rule is a chained splitmix64
// finalizer over (seed, stream tag, indices...), so e.g. the fit seed of
// fold k inside an evaluation with seed s is derive(s, {stream::fold_fit, k}).
// Results are therefore independent of thread scheduling as long as every
// work unit derives its own seed from its indices.
//
// The engine is std::mt19937_64 (its output sequence is pinned by the
// standard). Gaussians come from a hand-rolled Box-Muller transform because
// std::normal_distribution's algorithm is implementation-defined. Streams are
// bit-reproducible for a fixed binary; across platforms they agree up to
// libm's rounding of log/cos/sin.

namespace cvlab::rng {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Substream derivation: fold each word into the running hash.
inline std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = mix64(seed + kGolden);
  for (std::uint64_t w : words) h = mix64((h + kGolden) ^ w);
  return h;
}

// Stream tags used by the library. Documented here so external tooling can
// reproduce any intermediate quantity from the master seed alone.
namespace stream {
constexpr std::uint64_t dataset = 1;       // sample_dataset per (replication, n)
constexpr std::uint64_t folds = 2;         // make_folds per (replication, n)
constexpr std::uint64_t evaluation = 3;    // decompose/cross_validate per (replication, n); shared across learners
constexpr std::uint64_t full_fit = 4;      // fit-on-full-data per (replication, n); shared across learners
constexpr std::uint64_t oracle_mc = 5;     // oracle_excess_risk draws per (replication, n); shared across learners
constexpr std::uint64_t fold_fit = 6;      // per-fold fit seed inside one evaluation
constexpr std::uint64_t tree = 7;          // per-tree seed inside one forest fit
constexpr std::uint64_t boost_cv = 8;      // internal CV fold assignment inside one boosting fit
}  // namespace stream

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1) with 53 significant bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; generates pairs, caches the second.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 strictly inside (0,1) so log(u1) is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t uniform_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::span<T> v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // m distinct values from {0,...,n-1}, returned sorted ascending.
  std::vector<std::uint32_t> sample_without_replacement(std::size_t n, std::size_t m);

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::vector<std::uint32_t> Rng::sample_without_replacement(std::size_t n, std::size_t m) {
  std::vector<std::uint32_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<std::uint32_t>(i);
  // partial Fisher-Yates: fix the first m slots
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace cvlab::rng
