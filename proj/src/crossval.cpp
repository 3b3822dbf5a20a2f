#include "cvlab/crossval.hpp"

#include <cmath>

#include "cvlab/csv.hpp"
#include "cvlab/error.hpp"
#include "cvlab/kernels.hpp"
#include "cvlab/rng.hpp"

namespace cvlab {

namespace {

// Held-out responses and predictions per fold, in ascending original-index
// order. Building this once is the single source of fits for both
// cross_validate and decompose.
struct FoldEvals {
  std::vector<std::vector<double>> y;
  std::vector<std::vector<double>> pred;
};

FoldEvals evaluate_folds(const Learner& learner, const Dataset& data, const FoldAssignment& folds,
                         std::uint64_t seed) {
  if (folds.n() != data.n()) {
    throw Error(Errc::invalid_input, "cross-validation: fold assignment is for n=" +
                                         std::to_string(folds.n()) + ", dataset has n=" +
                                         std::to_string(data.n()));
  }
  const std::size_t n = data.n();
  FoldEvals evals;
  evals.y.resize(folds.k_folds);
  evals.pred.resize(folds.k_folds);
  std::vector<std::uint32_t> train_rows;
  for (std::size_t k = 0; k < folds.k_folds; ++k) {
    train_rows.clear();
    train_rows.reserve(folds.train_sizes[k]);
    for (std::size_t i = 0; i < n; ++i) {
      if (folds.fold_of[i] != k) train_rows.push_back(static_cast<std::uint32_t>(i));
    }
    const Dataset train = data.subset(train_rows);
    const FittedRule rule = learner.fit(train, rng::derive(seed, {rng::stream::fold_fit, k}));

    const auto& members = folds.members[k];
    auto& ys = evals.y[k];
    auto& preds = evals.pred[k];
    ys.reserve(members.size());
    preds.reserve(members.size());
    for (const std::uint32_t i : members) {
      ys.push_back(data.y(i));
      preds.push_back(rule.predict(data.row(i)));
    }
  }
  return evals;
}

// Grand total of held-out squared errors, accumulated in fold order. Both
// public entry points share this path so their cv_total agrees bitwise.
double total_sq_error(const FoldEvals& evals) {
  double total = 0.0;
  for (std::size_t k = 0; k < evals.y.size(); ++k) {
    total += kernels::active().sum_sq_diff(evals.y[k].data(), evals.pred[k].data(),
                                           evals.y[k].size());
  }
  return total;
}

}  // namespace

double cross_validate(const Learner& learner, const Dataset& data, const FoldAssignment& folds,
                      std::uint64_t seed) {
  const FoldEvals evals = evaluate_folds(learner, data, folds, seed);
  return total_sq_error(evals) / static_cast<double>(data.n());
}

std::vector<double> heldout_predictions(const Learner& learner, const Dataset& data,
                                        const FoldAssignment& folds, std::uint64_t seed) {
  const FoldEvals evals = evaluate_folds(learner, data, folds, seed);
  std::vector<double> out(data.n());
  for (std::size_t k = 0; k < folds.k_folds; ++k) {
    const auto& members = folds.members[k];
    for (std::size_t i = 0; i < members.size(); ++i) out[members[i]] = evals.pred[k][i];
  }
  return out;
}

CvDecomposition decompose(const Learner& learner, const Dataset& data, const FoldAssignment& folds,
                          const MeanFn& mu, std::uint64_t seed) {
  if (!mu) throw Error(Errc::invalid_input, "decompose: mu is not set");
  const FoldEvals evals = evaluate_folds(learner, data, folds, seed);
  const double n = static_cast<double>(data.n());

  CvDecomposition dec;
  dec.per_fold.reserve(folds.k_folds);
  double star = 0.0;
  double cross = 0.0;
  double gap = 0.0;
  std::vector<double> mu_buf;
  for (std::size_t k = 0; k < folds.k_folds; ++k) {
    const auto& members = folds.members[k];
    mu_buf.clear();
    mu_buf.reserve(members.size());
    for (const std::uint32_t i : members) mu_buf.push_back(mu(data.row(i)));

    FoldTerms terms;
    terms.fold = k;
    terms.count = members.size();
    terms.ss_total =
        kernels::active().sum_sq_diff(evals.y[k].data(), evals.pred[k].data(), members.size());
    const auto sums = kernels::active().decomp_sums(evals.y[k].data(), mu_buf.data(),
                                                    evals.pred[k].data(), members.size());
    terms.ss_star = sums.star;
    terms.cross = sums.cross;
    terms.ss_gap = sums.gap;
    dec.per_fold.push_back(terms);

    star += sums.star;
    cross += sums.cross;
    gap += sums.gap;
  }
  dec.cv_total = total_sq_error(evals) / n;
  dec.cv_star = star / n;
  dec.z = cross / n;
  dec.delta_sq = gap / n;
  return dec;
}

ExcessRisk oracle_excess_risk(const FittedRule& rule, const Dgp& dgp, std::size_t mc_draws,
                              std::uint64_t seed) {
  validate(dgp);
  if (mc_draws < 1) throw Error(Errc::invalid_input, "oracle_excess_risk: mc_draws >= 1");

  rng::Rng gen(seed);
  std::vector<double> x(dgp.p);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t d = 0; d < mc_draws; ++d) {
    for (double& v : x) v = gen.normal();
    const double g = rule.predict(x) - dgp.mu(x);
    const double v = g * g;
    sum += v;
    sum_sq += v * v;
  }
  const double m = static_cast<double>(mc_draws);
  ExcessRisk out;
  out.draws = mc_draws;
  out.mean = sum / m;
  if (mc_draws > 1) {
    const double var = std::max(0.0, (sum_sq - sum * sum / m) / (m - 1.0));
    out.std_error = std::sqrt(var / m);
  }
  return out;
}

std::string decomposition_csv_header() {
  return "replication,learner,n,K,cv_total,cv_star,z,delta_sq";
}

std::string decomposition_csv_row(std::size_t replication, const std::string& learner,
                                  std::size_t n, std::size_t k_folds, const CvDecomposition& dec) {
  std::string row = std::to_string(replication);
  row += ',';
  row += learner;
  row += ',';
  row += std::to_string(n);
  row += ',';
  row += std::to_string(k_folds);
  row += ',';
  row += csv::format_double(dec.cv_total);
  row += ',';
  row += csv::format_double(dec.cv_star);
  row += ',';
  row += csv::format_double(dec.z);
  row += ',';
  row += csv::format_double(dec.delta_sq);
  return row;
}

}  // namespace cvlab
