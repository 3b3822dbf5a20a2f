#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "cvlab/rng.hpp"

using namespace cvlab;

TEST_CASE("derive is deterministic and tag-sensitive") {
  const auto a = rng::derive(123, {rng::stream::dataset, 5, 400});
  CHECK(a == rng::derive(123, {rng::stream::dataset, 5, 400}));
  CHECK(a != rng::derive(123, {rng::stream::dataset, 6, 400}));
  CHECK(a != rng::derive(123, {rng::stream::dataset, 5, 401}));
  CHECK(a != rng::derive(123, {rng::stream::folds, 5, 400}));
  CHECK(a != rng::derive(124, {rng::stream::dataset, 5, 400}));
}

TEST_CASE("generator streams are reproducible") {
  rng::Rng g1(99);
  rng::Rng g2(99);
  for (int i = 0; i < 1000; ++i) {
    CHECK(g1.next_u64() == g2.next_u64());
  }
  rng::Rng n1(7);
  rng::Rng n2(7);
  for (int i = 0; i < 1000; ++i) {
    CHECK(n1.normal() == n2.normal());
  }
}

TEST_CASE("uniform lies in [0,1)") {
  rng::Rng gen(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = gen.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments at 200k draws") {
  rng::Rng gen(2024);
  const std::size_t n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  double sum_4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = gen.normal();
    sum += z;
    sum_sq += z * z;
    sum_4 += z * z * z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  const double kurt = sum_4 / n;
  CHECK(std::abs(mean) < 0.01);       // se ~ 0.0022
  CHECK(std::abs(var - 1.0) < 0.02);  // se ~ 0.0032
  CHECK(std::abs(kurt - 3.0) < 0.15);
}

TEST_CASE("uniform_below is in range and deterministic") {
  rng::Rng g1(17);
  rng::Rng g2(17);
  for (int i = 0; i < 5000; ++i) {
    const auto v = g1.uniform_below(13);
    CHECK(v < 13);
    CHECK(v == g2.uniform_below(13));
  }
}

TEST_CASE("sample_without_replacement yields sorted distinct indices") {
  rng::Rng gen(31);
  const auto s = gen.sample_without_replacement(50, 20);
  CHECK(s.size() == 20);
  std::set<std::uint32_t> seen(s.begin(), s.end());
  CHECK(seen.size() == 20);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1] < s[i]);
  for (const auto v : s) CHECK(v < 50);

  const auto all = gen.sample_without_replacement(9, 9);
  for (std::size_t i = 0; i < 9; ++i) CHECK(all[i] == i);
}

TEST_CASE("shuffle is a permutation") {
  rng::Rng gen(8);
  std::vector<std::uint32_t> v(40);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::uint32_t>(i);
  gen.shuffle(std::span<std::uint32_t>(v));
  std::set<std::uint32_t> seen(v.begin(), v.end());
  CHECK(seen.size() == 40);
}
