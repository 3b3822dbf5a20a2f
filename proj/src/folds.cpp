#include "cvlab/folds.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "cvlab/error.hpp"
#include "cvlab/rng.hpp"

namespace cvlab {

FoldAssignment make_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed) {
  if (k_folds < 2 || k_folds > n) {
    throw Error(Errc::invalid_folds, "make_folds: need 2 <= K <= n, got K=" +
                                         std::to_string(k_folds) + ", n=" + std::to_string(n));
  }

  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  rng::Rng gen(seed);
  gen.shuffle(std::span<std::uint32_t>(perm));

  FoldAssignment folds;
  folds.k_folds = k_folds;
  folds.fold_of.resize(n);
  folds.sizes.assign(k_folds, 0);
  folds.members.resize(k_folds);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % k_folds;
    folds.fold_of[perm[i]] = static_cast<std::uint32_t>(k);
    folds.members[k].push_back(perm[i]);
    ++folds.sizes[k];
  }
  for (auto& m : folds.members) std::sort(m.begin(), m.end());
  folds.train_sizes.resize(k_folds);
  for (std::size_t k = 0; k < k_folds; ++k) folds.train_sizes[k] = n - folds.sizes[k];
  return folds;
}

}  // namespace cvlab
