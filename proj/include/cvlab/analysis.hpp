#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvlab/crossval.hpp"
#include "cvlab/dgp.hpp"
#include "cvlab/learners.hpp"

// Monte Carlo harness and statistical checks. Replications are independent
// work units with seeds derived from (master_seed, replication, n), so any
// worker count produces the identical table; learners inside a replication
// share the dataset, the folds, and the evaluation/fit seeds, which is what
// makes paired comparisons cancel the learner-free noise term.

namespace cvlab {

struct ExperimentConfig {
  Dgp dgp;
  std::vector<Learner> learners;        // one or two, distinct names
  std::vector<std::size_t> n_grid;      // strictly increasing
  std::size_t k_folds = 10;
  std::size_t replications = 1;
  std::uint64_t master_seed = 1;
  std::size_t mc_draws_oracle = 100000;  // fresh draws for the excess-risk oracle
  bool forest_oob = false;               // also record out-of-bag error for forest learners
};

void validate(const ExperimentConfig& config);

struct ReplicationRow {
  std::size_t replication = 0;
  std::size_t n = 0;
  std::string learner;
  double cv_total = 0.0;
  double cv_star = 0.0;
  double z = 0.0;
  double delta_sq = 0.0;
  double oracle_excess_risk = 0.0;
};

struct OobRow {
  std::size_t replication = 0;
  std::size_t n = 0;
  std::string learner;
  double oob_error = 0.0;
  std::size_t n_used = 0;
  std::size_t n_skipped = 0;
};

struct ReplicationTable {
  std::vector<ReplicationRow> rows;
  std::vector<OobRow> oob_rows;  // filled only when forest_oob was requested

  std::vector<std::string> learner_names() const;  // first-appearance order
  std::vector<std::size_t> n_values() const;       // ascending, unique
  ReplicationTable filter(const std::optional<std::string>& learner,
                          std::optional<std::size_t> n) const;
};

// Runs the full experiment: per (replication, n) sample a dataset, make
// shared folds, decompose every learner with a shared evaluation seed, fit
// each learner on the full data (shared fit seed) and measure its oracle
// excess risk on shared Monte Carlo draws. Row order is (n ascending,
// replication, learner-in-config-order), independent of `workers`.
ReplicationTable run_replications(const ExperimentConfig& config, std::size_t workers = 1,
                                  std::ostream* progress = nullptr);

// CSV schema: replication,n,learner,cv_total,cv_star,z,delta_sq,oracle_excess_risk
void write_table_csv(const ReplicationTable& table, std::ostream& out);
ReplicationTable read_table_csv(std::istream& in);
// CSV schema: replication,n,learner,oob_error,oob_n_used,oob_n_skipped
void write_oob_csv(const ReplicationTable& table, std::ostream& out);

// ---------------------------------------------------------------------------
// Risk-estimation check: sqrt(n) (cv_total - Err*) should be centered at 0
// with variance Var[(Y - mu(X))^2], regardless of the learner.
// ---------------------------------------------------------------------------
struct Prop1Report {
  std::string learner;
  std::size_t n = 0;
  std::size_t replications = 0;
  double err_star = 0.0;
  double theoretical_var = 0.0;
  double mean_stat = 0.0;  // mean of sqrt(n)(cv - Err*)
  double mean_se = 0.0;
  double mean_z = 0.0;     // mean_stat / mean_se
  double sample_var = 0.0;
  double var_ratio = 0.0;  // sample_var / theoretical_var
  double ks_distance = 0.0;  // sup-distance of the empirical CDF vs N(0, theoretical_var)
  double ks_threshold = 0.15;  // documented decision threshold, not a formal test
  bool ks_pass = false;

  std::string to_text() const;
};

// Expects a single learner at a single n (filter the table first) and at
// least 100 replications (Error(insufficient_data) below that).
Prop1Report prop1_check(const ReplicationTable& table, const Dgp& dgp);

// ---------------------------------------------------------------------------
// Model-selection check for a pair of learners sharing folds per replication.
// ---------------------------------------------------------------------------
struct Prop2PerN {
  std::size_t n = 0;
  std::size_t replications = 0;
  std::size_t ties = 0;     // cv or delta_sq difference exactly zero
  std::size_t flagged = 0;  // |delta_sq difference| < 1e-15: excluded from the ratio only
  bool degenerate = false;  // every replication tied
  // fraction of decidable replications where the learner with the smaller
  // delta_sq also has the smaller cv_total
  double selection_accuracy = 0.0;
  double median_ratio = 0.0;  // median of (cv' - cv) / (delta_sq' - delta_sq)
  // accuracy against the declared-rate ordering (NaN unless both learners
  // declare rates that the ordering assumptions rank strictly)
  double declared_accuracy = 0.0;
  std::string mean_better;  // learner with the smaller mean delta_sq at this n
};

struct Prop2Report {
  std::string learner_a;  // table order
  std::string learner_b;
  std::vector<Prop2PerN> per_n;

  std::string to_text() const;
};

// rate_a / rate_b are the declared rates of the first / second learner in
// table order, when known; they feed the alternative population-level
// ordering reported alongside the per-replication one.
Prop2Report prop2_check(const ReplicationTable& table,
                        const std::optional<DeclaredRate>& rate_a = std::nullopt,
                        const std::optional<DeclaredRate>& rate_b = std::nullopt);

// ---------------------------------------------------------------------------
// Excess-risk decay rate from a log-log fit of mean oracle excess risk on n.
// ---------------------------------------------------------------------------
struct RateReport {
  std::string learner;
  std::size_t reps = 0;
  std::size_t mc_draws = 0;
  std::vector<std::size_t> n_grid;
  std::vector<double> mean_excess;    // per n
  std::vector<double> log_residuals;  // residuals of the log-log fit
  double slope = 0.0;                 // targets -2 gamma
  double slope_se = 0.0;
  double intercept = 0.0;
  double gamma_hat = 0.0;  // -slope / 2
  double gamma_se = 0.0;

  std::string to_text() const;
};

// Requires |n_grid| >= 3, strictly increasing, spanning at least a factor
// of 8. Throws Error(log_domain) if any mean excess risk is nonpositive.
RateReport rate_estimate(const Learner& learner, const Dgp& dgp,
                         std::span<const std::size_t> n_grid, std::size_t reps,
                         std::uint64_t master_seed, std::size_t mc_draws = 100000);

// ---------------------------------------------------------------------------
// Scaling of the cross term and the oracle term across n: the RMS of z
// targets slope -(0.5 + gamma), the mean of delta_sq targets -2 gamma.
// ---------------------------------------------------------------------------
struct ZScalingReport {
  std::string learner;
  double gamma = 0.0;
  std::size_t reps = 0;
  std::size_t k_folds = 0;
  bool degenerate = false;  // z identically zero (e.g. an exact-oracle learner)
  std::vector<std::size_t> n_grid;
  std::vector<double> rms_z;
  std::vector<double> mean_delta_sq;
  double z_slope = 0.0;
  double z_slope_se = 0.0;
  double z_target = 0.0;  // -(0.5 + gamma)
  double delta_slope = 0.0;
  double delta_slope_se = 0.0;
  double delta_target = 0.0;  // -2 gamma

  std::string to_text() const;
};

// Requires a declared-rate learner; grid preconditions as rate_estimate.
ZScalingReport z_scaling_check(const Learner& learner, const Dgp& dgp,
                               std::span<const std::size_t> n_grid, std::size_t reps,
                               std::uint64_t master_seed, std::size_t k_folds = 10);

// ---------------------------------------------------------------------------
// Paired comparison data for a two-learner table at a single n: histograms
// of within-replication differences, the paired scatter, and the Pearson
// correlation of the two cv_total series.
// ---------------------------------------------------------------------------
struct HistBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count_cv = 0;
  std::size_t count_oracle = 0;
};

struct ScatterPoint {
  std::size_t replication = 0;
  double cv_a = 0.0;
  double cv_b = 0.0;
};

struct PairedSummary {
  std::string learner_a;  // differences are (b - a), in table order
  std::string learner_b;
  std::size_t n = 0;
  std::size_t replications = 0;
  std::vector<HistBin> diff_hist;  // shared bins for cv and oracle differences
  std::vector<ScatterPoint> scatter;
  double pearson_cv = 0.0;
  bool pearson_degenerate = false;
  double mean_cv_a = 0.0, mean_cv_b = 0.0, sd_cv_a = 0.0, sd_cv_b = 0.0;
  double mean_oracle_a = 0.0, mean_oracle_b = 0.0, sd_oracle_a = 0.0, sd_oracle_b = 0.0;

  std::string to_text() const;
};

// Expects exactly two learners at a single n and >= 10 replications
// (Error(insufficient_data) below that).
PairedSummary paired_summary(const ReplicationTable& table);

// CSV schema: bin_lo,bin_hi,count_cv_diff,count_oracle_diff
void write_paired_hist_csv(const PairedSummary& summary, std::ostream& out);
// CSV schema: replication,cv_<a>,cv_<b>
void write_paired_scatter_csv(const PairedSummary& summary, std::ostream& out);

}  // namespace cvlab
