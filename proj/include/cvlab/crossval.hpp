#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvlab/dgp.hpp"
#include "cvlab/folds.hpp"
#include "cvlab/learners.hpp"

// K-fold cross-validation with an exact oracle decomposition. With
// mu the true conditional mean and muhat_k the rule fit without fold k,
//
//   cv_total = (1/n) sum_k sum_{i in S_k} (y_i - muhat_k(x_i))^2
//            = cv_star + 2 z + delta_sq,                 where
//   cv_star  = (1/n) sum_i (y_i - mu(x_i))^2             (learner-free)
//   z        = (1/n) sum   (y_i - mu(x_i)) (mu(x_i) - muhat_k(x_i))
//   delta_sq = (1/n) sum   (mu(x_i) - muhat_k(x_i))^2    (>= 0)
//
// decompose() and cross_validate() derive identical per-fold fit seeds from
// the evaluation seed, so they reuse the same fits and agree bit for bit on
// cv_total.

namespace cvlab {

// Raw (unnormalized) per-fold sums.
struct FoldTerms {
  std::size_t fold = 0;
  std::size_t count = 0;
  double ss_total = 0.0;  // sum (y - pred)^2
  double ss_star = 0.0;   // sum (y - mu)^2
  double cross = 0.0;     // sum (y - mu)(mu - pred)
  double ss_gap = 0.0;    // sum (mu - pred)^2
};

struct CvDecomposition {
  double cv_total = 0.0;
  double cv_star = 0.0;
  double z = 0.0;
  double delta_sq = 0.0;
  std::vector<FoldTerms> per_fold;
};

// The K-fold estimate. For each fold k the learner is fit on all samples
// outside the fold (fit seed = derive(seed, {fold_fit, k})) and evaluated on
// the fold; the grand total is normalized by n (not per-fold averaging).
// Held-out points are never visible to the fit that predicts them.
double cross_validate(const Learner& learner, const Dataset& data, const FoldAssignment& folds,
                      std::uint64_t seed);

// Held-out predictions: entry i is muhat_{(-fold_of[i])}(x_i), from the same
// per-fold fits as cross_validate with the same seed.
std::vector<double> heldout_predictions(const Learner& learner, const Dataset& data,
                                        const FoldAssignment& folds, std::uint64_t seed);

// The full decomposition; mu must be the true conditional mean of the
// generating process for the oracle reading of the terms.
CvDecomposition decompose(const Learner& learner, const Dataset& data,
                          const FoldAssignment& folds, const MeanFn& mu, std::uint64_t seed);

struct ExcessRisk {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
};

// Monte Carlo estimate of E[(rule(X) - mu(X))^2 | rule] over fresh feature
// draws from the DGP.
ExcessRisk oracle_excess_risk(const FittedRule& rule, const Dgp& dgp, std::size_t mc_draws,
                              std::uint64_t seed);

// Flat CSV row: replication,learner,n,K,cv_total,cv_star,z,delta_sq
std::string decomposition_csv_header();
std::string decomposition_csv_row(std::size_t replication, const std::string& learner,
                                  std::size_t n, std::size_t k_folds, const CvDecomposition& dec);

}  // namespace cvlab
