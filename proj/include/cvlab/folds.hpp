#pragma once

#include <cstdint>
#include <vector>

// Fold assignment for K-fold cross-validation (part of the crossval module;
// split out so learners with internal CV can reuse it).

namespace cvlab {

// A partition of {0,...,n-1} into K non-overlapping folds whose sizes differ
// by at most one. train_sizes[k] = n - sizes[k] is the amount of data a fit
// that holds out fold k trains on.
struct FoldAssignment {
  std::vector<std::uint32_t> fold_of;            // size n, values in [0, K)
  std::size_t k_folds = 0;                       // K
  std::vector<std::size_t> sizes;                // |S_k|
  std::vector<std::size_t> train_sizes;          // n_k = n - |S_k|
  std::vector<std::vector<std::uint32_t>> members;  // fold members, ascending

  std::size_t n() const { return fold_of.size(); }
};

// A uniformly random permutation (from seed) dealt round-robin into K folds.
// Member lists are sorted ascending, so downstream evaluation order does not
// depend on the permutation beyond membership. K = n is leave-one-out.
// Throws Error(invalid_folds) unless 2 <= K <= n.
FoldAssignment make_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed);

}  // namespace cvlab
