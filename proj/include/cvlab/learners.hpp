#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvlab/dgp.hpp"

// The algorithm abstraction: a Learner turns a dataset (plus a fit seed)
// into a FittedRule. Concrete learners: a synthetic rule with exactly
// controlled excess risk, k-nearest-neighbors, a Nadaraya-Watson smoother,
// least-squares boosted stumps, and a subsampled regression forest.

namespace cvlab {

// Known root-mean-squared excess-error decay: n^{-gamma} with amplitude
// band [c_minus, c_plus]. Admissible exponents lie strictly inside
// (0.25, 0.5): slower than parametric, faster than fourth-root.
struct DeclaredRate {
  double gamma;
  double c_minus;
  double c_plus;
};

class ForestFit;  // defined below

// A fitted predictor x -> yhat. Total on R^p, deterministic, immutable.
class FittedRule {
 public:
  using PredictFn = std::function<double(std::span<const double>)>;

  FittedRule() = default;
  FittedRule(PredictFn predict, std::size_t training_n,
             std::shared_ptr<const ForestFit> forest = nullptr)
      : predict_(std::move(predict)), training_n_(training_n), forest_(std::move(forest)) {}

  double predict(std::span<const double> x) const { return predict_(x); }
  std::size_t training_n() const { return training_n_; }

  // Non-null only for forest fits; grants access to per-tree predictions
  // and in-bag records (needed for out-of-bag evaluation).
  const ForestFit* forest() const { return forest_.get(); }

 private:
  PredictFn predict_;
  std::size_t training_n_ = 0;
  std::shared_ptr<const ForestFit> forest_;
};

class Learner {
 public:
  using FitFn = std::function<FittedRule(const Dataset&, std::uint64_t)>;

  Learner() = default;
  Learner(std::string name, FitFn fit, std::optional<DeclaredRate> rate = std::nullopt)
      : name_(std::move(name)), fit_(std::move(fit)), rate_(rate) {}

  // Deterministic given (data, seed).
  FittedRule fit(const Dataset& data, std::uint64_t seed) const { return fit_(data, seed); }

  const std::string& name() const { return name_; }
  const std::optional<DeclaredRate>& declared_rate() const { return rate_; }

 private:
  std::string name_;
  FitFn fit_;
  std::optional<DeclaredRate> rate_;
};

// ---------------------------------------------------------------------------
// Synthetic learner
// ---------------------------------------------------------------------------

// Fitting on n samples draws a unit vector u from the fit seed and returns
//   predict(x) = mu(x) + c n^{-gamma} (u . x).
// Under X ~ N(0, I), E[(u . X)^2] = |u|^2 = 1, so the conditional excess risk
// equals c^2 n^{-2 gamma} exactly for every draw of u: the declared rate
// holds with c_minus = c_plus = c. The training responses are ignored, which
// makes this the maximally controllable instance of a rate-gamma learner.
//
// Throws Error(invalid_rate) unless 0.25 < gamma < 0.5, Error(invalid_input)
// if c < 0, Error(unsupported_law) if the feature law is not standard normal.
Learner synthetic_learner(double gamma, double c, const Dgp& dgp);

// ---------------------------------------------------------------------------
// Nonparametric learners
// ---------------------------------------------------------------------------

// k-nearest-neighbor mean under Euclidean distance; neighbor ties broken by
// lowest training index. k_rule must satisfy 1 <= k_rule(n) <= n at fit
// time (Error(invalid_input) otherwise, also for an empty dataset).
Learner knn_learner(std::function<std::size_t(std::size_t)> k_rule);
Learner knn_learner(std::size_t k);  // fixed k

// Nadaraya-Watson with a Gaussian kernel, w_i = exp(-|x - X_i|^2 / (2 h^2)).
// If every weight underflows to zero the prediction falls back to the
// training mean. bandwidth_rule(n) must be > 0 at fit time.
Learner kernel_learner(std::function<double(std::size_t)> bandwidth_rule);
Learner kernel_learner(double bandwidth);  // fixed bandwidth

// Predicts a constant everywhere; the trivial baseline in several contracts.
Learner constant_learner(double value);

// ---------------------------------------------------------------------------
// Boosted stumps
// ---------------------------------------------------------------------------

struct BoostConfig {
  std::size_t max_rounds = 300;
  double learning_rate = 0.1;
  std::size_t internal_cv_folds = 5;  // picks the round count
  std::size_t patience = 10;          // early stop after this many non-improving rounds
};

// Least-squares gradient boosting with depth-1 regression stumps. The round
// count is chosen by internal K-fold cross-validation grown in lockstep
// across folds with early stopping, then the model is refit on all data.
// Stump thresholds are midpoints of consecutive sorted distinct values; gain
// ties keep the lowest feature index, then the smallest threshold.
// Construction validates max_rounds >= 1, 0 < learning_rate <= 1,
// internal_cv_folds >= 2, patience >= 1; fitting on fewer samples than
// internal folds throws Error(invalid_config).
Learner boosted_stumps_learner(const BoostConfig& config);

// ---------------------------------------------------------------------------
// Regression forest
// ---------------------------------------------------------------------------

struct ForestConfig {
  std::size_t num_trees = 50;
  std::size_t min_leaf = 5;
  double subsample = 0.5;  // in-bag fraction, sampled without replacement
  std::size_t mtry = 3;    // split candidates per node
};

struct TreeNode {
  std::int32_t left = -1;   // child indices; -1 marks a leaf
  std::int32_t right = -1;
  std::uint32_t feature = 0;
  double threshold = 0.0;  // goes left when x[feature] <= threshold
  double value = 0.0;      // leaf mean
};

class ForestFit {
 public:
  ForestFit(std::vector<std::vector<TreeNode>> trees,
            std::vector<std::vector<std::uint32_t>> in_bag, std::size_t n_train, std::size_t p)
      : trees_(std::move(trees)), in_bag_(std::move(in_bag)), n_train_(n_train), p_(p) {}

  std::size_t num_trees() const { return trees_.size(); }
  std::size_t n_train() const { return n_train_; }
  std::size_t p() const { return p_; }

  double tree_predict(std::size_t t, std::span<const double> x) const;
  double predict(std::span<const double> x) const;  // mean over trees, in tree order

  // Sorted in-bag sample indices of tree t.
  const std::vector<std::uint32_t>& in_bag(std::size_t t) const { return in_bag_[t]; }

 private:
  std::vector<std::vector<TreeNode>> trees_;
  std::vector<std::vector<std::uint32_t>> in_bag_;
  std::size_t n_train_;
  std::size_t p_;
};

// Average of num_trees CART-style regression trees, each grown on an in-bag
// subsample (without replacement) with mtry random split candidates per
// node. Per-tree seeds derive from the fit seed and tree index. Split ties
// keep the lowest feature index, then the smallest threshold. Construction
// validates num_trees >= 1, min_leaf >= 1, 0 < subsample <= 1, mtry >= 1;
// mtry > p is rejected at fit time (Error(invalid_config)).
Learner forest_learner(const ForestConfig& config);

struct OobResult {
  double error = 0.0;       // mean squared error over usable samples
  std::size_t n_used = 0;   // samples with at least one tree that excluded them
  std::size_t n_skipped = 0;  // samples in-bag for every tree
};

// Out-of-bag error of a forest fit on its own training data: for each
// sample, average only the trees whose in-bag subsample excluded it.
// Requires rule.forest() != nullptr and training_n == data.n()
// (Error(invalid_input)); throws Error(undefined_oob) when every sample is
// in-bag everywhere (e.g. subsample = 1).
OobResult oob_error(const FittedRule& rule, const Dataset& data);

}  // namespace cvlab
