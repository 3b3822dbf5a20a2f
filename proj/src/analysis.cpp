#include "cvlab/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <thread>

#include "cvlab/csv.hpp"
#include "cvlab/error.hpp"
#include "cvlab/rng.hpp"

namespace cvlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void kv(std::string& out, const std::string& key, const std::string& value) {
  out += key;
  out += " = ";
  out += value;
  out += '\n';
}

void kv(std::string& out, const std::string& key, double value) {
  kv(out, key, csv::format_double(value));
}

void kv(std::string& out, const std::string& key, std::size_t value) {
  kv(out, key, std::to_string(value));
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // sample variance, n-1 denominator
};

MeanVar mean_var(std::span<const double> v) {
  MeanVar out;
  if (v.empty()) return out;
  double s = 0.0;
  for (double x : v) s += x;
  out.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) {
      const double d = x - out.mean;
      ss += d * d;
    }
    out.var = ss / static_cast<double>(v.size() - 1);
  }
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  std::vector<double> residuals;
};

// Ordinary least squares of y on x; slope SE from the residual variance
// with m - 2 degrees of freedom.
LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t m = x.size();
  double xbar = 0.0;
  double ybar = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    xbar += x[i];
    ybar += y[i];
  }
  xbar /= static_cast<double>(m);
  ybar /= static_cast<double>(m);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  fit.residuals.resize(m);
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    fit.residuals[i] = y[i] - (fit.intercept + fit.slope * x[i]);
    rss += fit.residuals[i] * fit.residuals[i];
  }
  if (m > 2) fit.slope_se = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
  return fit;
}

void check_grid(std::span<const std::size_t> n_grid) {
  if (n_grid.size() < 3) {
    throw Error(Errc::invalid_input, "n_grid must have at least 3 sizes");
  }
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) {
      throw Error(Errc::invalid_input, "n_grid must be strictly increasing");
    }
  }
  if (n_grid.back() < 8 * n_grid.front()) {
    throw Error(Errc::invalid_input, "n_grid must span at least a factor of 8");
  }
}

}  // namespace

void validate(const ExperimentConfig& config) {
  validate(config.dgp);
  if (config.learners.empty() || config.learners.size() > 2) {
    throw Error(Errc::invalid_config, "experiment: need one or two learners");
  }
  for (const auto& l : config.learners) {
    if (l.name().empty() || l.name().find(',') != std::string::npos ||
        l.name().find('\n') != std::string::npos) {
      throw Error(Errc::invalid_config, "experiment: learner names must be nonempty and csv-safe");
    }
  }
  if (config.learners.size() == 2 && config.learners[0].name() == config.learners[1].name()) {
    throw Error(Errc::invalid_config, "experiment: learner names must be distinct");
  }
  if (config.n_grid.empty()) throw Error(Errc::invalid_config, "experiment: n_grid is empty");
  for (std::size_t i = 1; i < config.n_grid.size(); ++i) {
    if (config.n_grid[i] <= config.n_grid[i - 1]) {
      throw Error(Errc::invalid_config, "experiment: n_grid must be strictly increasing");
    }
  }
  if (config.k_folds < 2 || config.k_folds > config.n_grid.front()) {
    throw Error(Errc::invalid_config, "experiment: need 2 <= k_folds <= min(n_grid)");
  }
  if (config.replications < 1) throw Error(Errc::invalid_config, "experiment: replications >= 1");
  if (config.mc_draws_oracle < 1) {
    throw Error(Errc::invalid_config, "experiment: mc_draws_oracle >= 1");
  }
}

std::vector<std::string> ReplicationTable::learner_names() const {
  std::vector<std::string> names;
  for (const auto& row : rows) {
    if (std::find(names.begin(), names.end(), row.learner) == names.end()) {
      names.push_back(row.learner);
    }
  }
  return names;
}

std::vector<std::size_t> ReplicationTable::n_values() const {
  std::vector<std::size_t> ns;
  for (const auto& row : rows) ns.push_back(row.n);
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  return ns;
}

ReplicationTable ReplicationTable::filter(const std::optional<std::string>& learner,
                                          std::optional<std::size_t> n) const {
  ReplicationTable out;
  for (const auto& row : rows) {
    if (learner && row.learner != *learner) continue;
    if (n && row.n != *n) continue;
    out.rows.push_back(row);
  }
  for (const auto& row : oob_rows) {
    if (learner && row.learner != *learner) continue;
    if (n && row.n != *n) continue;
    out.oob_rows.push_back(row);
  }
  return out;
}

ReplicationTable run_replications(const ExperimentConfig& config, std::size_t workers,
                                  std::ostream* progress) {
  validate(config);
  const std::size_t reps = config.replications;
  const std::size_t n_count = config.n_grid.size();
  const std::size_t n_learners = config.learners.size();
  const std::size_t items = n_count * reps;

  std::vector<ReplicationRow> rows(items * n_learners);
  std::vector<std::optional<OobRow>> oob_slots(items * n_learners);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  std::mutex progress_mutex;
  const std::size_t progress_every = std::max<std::size_t>(1, items / 20);

  auto work = [&]() {
    for (;;) {
      const std::size_t item = next.fetch_add(1);
      if (item >= items) return;
      const std::size_t n_idx = item / reps;
      const std::size_t r = item % reps;
      const std::size_t n = config.n_grid[n_idx];
      std::size_t learner_idx = 0;
      try {
        const std::uint64_t master = config.master_seed;
        const Dataset data =
            sample_dataset(config.dgp, n, rng::derive(master, {rng::stream::dataset, r, n}));
        const FoldAssignment folds =
            make_folds(n, config.k_folds, rng::derive(master, {rng::stream::folds, r, n}));
        const std::uint64_t eval_seed = rng::derive(master, {rng::stream::evaluation, r, n});
        const std::uint64_t full_seed = rng::derive(master, {rng::stream::full_fit, r, n});
        const std::uint64_t mc_seed = rng::derive(master, {rng::stream::oracle_mc, r, n});

        for (; learner_idx < n_learners; ++learner_idx) {
          const Learner& learner = config.learners[learner_idx];
          const CvDecomposition dec = decompose(learner, data, folds, config.dgp.mu, eval_seed);
          const FittedRule full_rule = learner.fit(data, full_seed);
          const ExcessRisk excess =
              oracle_excess_risk(full_rule, config.dgp, config.mc_draws_oracle, mc_seed);

          ReplicationRow& row = rows[item * n_learners + learner_idx];
          row.replication = r;
          row.n = n;
          row.learner = learner.name();
          row.cv_total = dec.cv_total;
          row.cv_star = dec.cv_star;
          row.z = dec.z;
          row.delta_sq = dec.delta_sq;
          row.oracle_excess_risk = excess.mean;

          if (config.forest_oob && full_rule.forest() != nullptr) {
            const OobResult oob = oob_error(full_rule, data);
            oob_slots[item * n_learners + learner_idx] =
                OobRow{r, n, learner.name(), oob.error, oob.n_used, oob.n_skipped};
          }
        }
      } catch (const Error& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          const std::string context = "replication " + std::to_string(r) + ", n=" +
                                      std::to_string(n) + ", learner " +
                                      config.learners[std::min(learner_idx, n_learners - 1)].name();
          failure = std::make_exception_ptr(Error(e.code(), context + ": " + e.what()));
        }
        return;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      const std::size_t completed = done.fetch_add(1) + 1;
      if (progress != nullptr && (completed % progress_every == 0 || completed == items)) {
        std::lock_guard lock(progress_mutex);
        (*progress) << "progress: " << completed << "/" << items << " replication units\n";
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ReplicationTable table;
  table.rows = std::move(rows);
  for (auto& slot : oob_slots) {
    if (slot) table.oob_rows.push_back(std::move(*slot));
  }
  return table;
}

static const char kTableHeader[] =
    "replication,n,learner,cv_total,cv_star,z,delta_sq,oracle_excess_risk";

void write_table_csv(const ReplicationTable& table, std::ostream& out) {
  out << kTableHeader << '\n';
  for (const auto& row : table.rows) {
    out << row.replication << ',' << row.n << ',' << row.learner << ','
        << csv::format_double(row.cv_total) << ',' << csv::format_double(row.cv_star) << ','
        << csv::format_double(row.z) << ',' << csv::format_double(row.delta_sq) << ','
        << csv::format_double(row.oracle_excess_risk) << '\n';
  }
}

ReplicationTable read_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || csv::strip_cr(line) != kTableHeader) {
    throw Error(Errc::schema_mismatch, "replication csv: bad header");
  }
  ReplicationTable table;
  while (std::getline(in, line)) {
    const auto sv = csv::strip_cr(line);
    if (sv.empty()) continue;
    const auto f = csv::split_fields(sv);
    if (f.size() != 8) throw Error(Errc::schema_mismatch, "replication csv: bad row");
    ReplicationRow row;
    row.replication = static_cast<std::size_t>(csv::parse_double(f[0]));
    row.n = static_cast<std::size_t>(csv::parse_double(f[1]));
    row.learner = std::string(f[2]);
    row.cv_total = csv::parse_double(f[3]);
    row.cv_star = csv::parse_double(f[4]);
    row.z = csv::parse_double(f[5]);
    row.delta_sq = csv::parse_double(f[6]);
    row.oracle_excess_risk = csv::parse_double(f[7]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_oob_csv(const ReplicationTable& table, std::ostream& out) {
  out << "replication,n,learner,oob_error,oob_n_used,oob_n_skipped\n";
  for (const auto& row : table.oob_rows) {
    out << row.replication << ',' << row.n << ',' << row.learner << ','
        << csv::format_double(row.oob_error) << ',' << row.n_used << ',' << row.n_skipped << '\n';
  }
}

// ---------------------------------------------------------------------------
// prop1_check
// ---------------------------------------------------------------------------

Prop1Report prop1_check(const ReplicationTable& table, const Dgp& dgp) {
  const auto names = table.learner_names();
  const auto ns = table.n_values();
  if (names.size() != 1 || ns.size() != 1) {
    throw Error(Errc::invalid_input,
                "prop1_check expects a single learner at a single n; filter the table first");
  }
  const std::size_t reps = table.rows.size();
  if (reps < 100) {
    throw Error(Errc::insufficient_data,
                "prop1_check needs >= 100 replications, got " + std::to_string(reps));
  }

  Prop1Report report;
  report.learner = names[0];
  report.n = ns[0];
  report.replications = reps;
  report.err_star = true_err(dgp);
  report.theoretical_var = cv_star_asymptotic_variance(dgp);

  const double sqrt_n = std::sqrt(static_cast<double>(report.n));
  std::vector<double> stats;
  stats.reserve(reps);
  for (const auto& row : table.rows) stats.push_back(sqrt_n * (row.cv_total - report.err_star));

  const MeanVar mv = mean_var(stats);
  report.mean_stat = mv.mean;
  report.sample_var = mv.var;
  report.mean_se = std::sqrt(mv.var / static_cast<double>(reps));
  if (report.mean_se > 0.0) {
    report.mean_z = report.mean_stat / report.mean_se;
  } else {
    report.mean_z = report.mean_stat == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  report.var_ratio = report.theoretical_var > 0.0 ? report.sample_var / report.theoretical_var
                                                  : kNaN;

  std::sort(stats.begin(), stats.end());
  const double sigma = std::sqrt(report.theoretical_var);
  double dist = 0.0;
  if (sigma > 0.0) {
    for (std::size_t i = 0; i < reps; ++i) {
      const double f = normal_cdf(stats[i] / sigma);
      dist = std::max(dist, std::max(f - static_cast<double>(i) / reps,
                                     static_cast<double>(i + 1) / reps - f));
    }
  } else {
    // degenerate target: point mass at zero
    for (double s : stats) {
      if (s != 0.0) dist = 1.0;
    }
  }
  report.ks_distance = dist;
  report.ks_pass = dist < report.ks_threshold;
  return report;
}

std::string Prop1Report::to_text() const {
  std::string out;
  kv(out, "report", std::string("prop1"));
  kv(out, "learner", learner);
  kv(out, "n", n);
  kv(out, "replications", replications);
  kv(out, "err_star", err_star);
  kv(out, "mean_stat", mean_stat);
  kv(out, "mean_se", mean_se);
  kv(out, "mean_z", mean_z);
  kv(out, "sample_var", sample_var);
  kv(out, "theoretical_var", theoretical_var);
  kv(out, "var_ratio", var_ratio);
  kv(out, "ks_distance", ks_distance);
  kv(out, "ks_threshold", ks_threshold);
  kv(out, "ks_pass", std::string(ks_pass ? "true" : "false"));
  return out;
}

// ---------------------------------------------------------------------------
// prop2_check
// ---------------------------------------------------------------------------

namespace {

struct PairedRows {
  std::vector<const ReplicationRow*> a;  // same replication order
  std::vector<const ReplicationRow*> b;
};

// Pairs rows of the two learners by replication index within one n.
PairedRows pair_rows(const ReplicationTable& table, const std::string& name_a,
                     const std::string& name_b, std::size_t n) {
  std::map<std::size_t, std::pair<const ReplicationRow*, const ReplicationRow*>> by_rep;
  for (const auto& row : table.rows) {
    if (row.n != n) continue;
    if (row.learner == name_a) {
      by_rep[row.replication].first = &row;
    } else if (row.learner == name_b) {
      by_rep[row.replication].second = &row;
    }
  }
  PairedRows out;
  for (const auto& [rep, pr] : by_rep) {
    if (pr.first == nullptr || pr.second == nullptr) {
      throw Error(Errc::invalid_input, "paired analysis: replication " + std::to_string(rep) +
                                           " at n=" + std::to_string(n) +
                                           " is missing one learner");
    }
    out.a.push_back(pr.first);
    out.b.push_back(pr.second);
  }
  return out;
}

}  // namespace

namespace {

// Population-level ordering from declared rates: a learner is declared
// better when its gamma is strictly larger, or gammas agree and its upper
// amplitude sits below the other's lower amplitude. Returns +1 when a wins,
// -1 when b wins, 0 when the assumptions rank neither.
int declared_order(const std::optional<DeclaredRate>& a, const std::optional<DeclaredRate>& b) {
  if (!a || !b) return 0;
  if (a->gamma > b->gamma || (a->gamma == b->gamma && a->c_plus < b->c_minus)) return 1;
  if (b->gamma > a->gamma || (b->gamma == a->gamma && b->c_plus < a->c_minus)) return -1;
  return 0;
}

}  // namespace

Prop2Report prop2_check(const ReplicationTable& table, const std::optional<DeclaredRate>& rate_a,
                        const std::optional<DeclaredRate>& rate_b) {
  const auto names = table.learner_names();
  if (names.size() != 2) {
    throw Error(Errc::invalid_input, "prop2_check expects a table with exactly two learners");
  }
  Prop2Report report;
  report.learner_a = names[0];
  report.learner_b = names[1];
  const int declared = declared_order(rate_a, rate_b);

  for (const std::size_t n : table.n_values()) {
    const PairedRows pairs = pair_rows(table, names[0], names[1], n);
    const std::size_t reps = pairs.a.size();

    Prop2PerN per;
    per.n = n;
    per.replications = reps;

    double mean_delta_a = 0.0;
    double mean_delta_b = 0.0;
    std::size_t correct = 0;
    std::size_t decidable = 0;
    std::size_t declared_correct = 0;
    std::size_t declared_decidable = 0;
    std::vector<double> ratios;
    for (std::size_t r = 0; r < reps; ++r) {
      const double ca = pairs.a[r]->cv_total;
      const double cb = pairs.b[r]->cv_total;
      const double da = pairs.a[r]->delta_sq;
      const double db = pairs.b[r]->delta_sq;
      mean_delta_a += da;
      mean_delta_b += db;

      if (ca == cb || da == db) {
        ++per.ties;
      } else {
        ++decidable;
        const bool oracle_prefers_a = da < db;
        const bool cv_prefers_a = ca < cb;
        if (oracle_prefers_a == cv_prefers_a) ++correct;
      }
      if (declared != 0 && ca != cb) {
        ++declared_decidable;
        if ((ca < cb) == (declared > 0)) ++declared_correct;
      }

      const double denom = db - da;
      if (std::abs(denom) < 1e-15) {
        ++per.flagged;
      } else {
        ratios.push_back((cb - ca) / denom);
      }
    }
    mean_delta_a /= static_cast<double>(reps);
    mean_delta_b /= static_cast<double>(reps);
    per.mean_better = mean_delta_a <= mean_delta_b ? names[0] : names[1];
    per.degenerate = decidable == 0;
    per.selection_accuracy =
        per.degenerate ? kNaN : static_cast<double>(correct) / static_cast<double>(decidable);
    per.median_ratio = median_of(std::move(ratios));
    per.declared_accuracy =
        declared_decidable > 0
            ? static_cast<double>(declared_correct) / static_cast<double>(declared_decidable)
            : kNaN;
    report.per_n.push_back(per);
  }
  return report;
}

std::string Prop2Report::to_text() const {
  std::string out;
  kv(out, "report", std::string("prop2"));
  kv(out, "learner_a", learner_a);
  kv(out, "learner_b", learner_b);
  for (const auto& per : per_n) {
    const std::string prefix = "n" + std::to_string(per.n) + ".";
    kv(out, prefix + "replications", per.replications);
    kv(out, prefix + "ties", per.ties);
    kv(out, prefix + "flagged_near_zero_denominator", per.flagged);
    kv(out, prefix + "degenerate", std::string(per.degenerate ? "true" : "false"));
    kv(out, prefix + "mean_better", per.mean_better);
    kv(out, prefix + "selection_accuracy", per.selection_accuracy);
    kv(out, prefix + "median_ratio", per.median_ratio);
    kv(out, prefix + "declared_accuracy", per.declared_accuracy);
  }
  return out;
}

// ---------------------------------------------------------------------------
// rate_estimate
// ---------------------------------------------------------------------------

RateReport rate_estimate(const Learner& learner, const Dgp& dgp,
                         std::span<const std::size_t> n_grid, std::size_t reps,
                         std::uint64_t master_seed, std::size_t mc_draws) {
  validate(dgp);
  check_grid(n_grid);
  if (reps < 1) throw Error(Errc::invalid_input, "rate_estimate: reps >= 1");
  if (mc_draws < 1) throw Error(Errc::invalid_input, "rate_estimate: mc_draws >= 1");

  RateReport report;
  report.learner = learner.name();
  report.reps = reps;
  report.mc_draws = mc_draws;
  report.n_grid.assign(n_grid.begin(), n_grid.end());

  for (const std::size_t n : n_grid) {
    double acc = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Dataset data =
          sample_dataset(dgp, n, rng::derive(master_seed, {rng::stream::dataset, r, n}));
      const FittedRule rule =
          learner.fit(data, rng::derive(master_seed, {rng::stream::full_fit, r, n}));
      acc += oracle_excess_risk(rule, dgp, mc_draws,
                                rng::derive(master_seed, {rng::stream::oracle_mc, r, n}))
                 .mean;
    }
    const double mean = acc / static_cast<double>(reps);
    if (!(mean > 0.0)) {
      throw Error(Errc::log_domain, "rate_estimate: mean excess risk at n=" + std::to_string(n) +
                                        " is " + csv::format_double(mean) +
                                        "; the log-log fit needs positive means");
    }
    report.mean_excess.push_back(mean);
  }

  std::vector<double> log_n;
  std::vector<double> log_excess;
  for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
    log_n.push_back(std::log(static_cast<double>(report.n_grid[i])));
    log_excess.push_back(std::log(report.mean_excess[i]));
  }
  const LineFit fit = fit_line(log_n, log_excess);
  report.slope = fit.slope;
  report.slope_se = fit.slope_se;
  report.intercept = fit.intercept;
  report.log_residuals = fit.residuals;
  report.gamma_hat = -fit.slope / 2.0;
  report.gamma_se = fit.slope_se / 2.0;
  return report;
}

std::string RateReport::to_text() const {
  std::string out;
  kv(out, "report", std::string("rate"));
  kv(out, "learner", learner);
  kv(out, "reps", reps);
  kv(out, "mc_draws", mc_draws);
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    kv(out, "mean_excess.n" + std::to_string(n_grid[i]), mean_excess[i]);
  }
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    kv(out, "log_residual.n" + std::to_string(n_grid[i]), log_residuals[i]);
  }
  kv(out, "slope", slope);
  kv(out, "slope_se", slope_se);
  kv(out, "intercept", intercept);
  kv(out, "gamma_hat", gamma_hat);
  kv(out, "gamma_se", gamma_se);
  return out;
}

// ---------------------------------------------------------------------------
// z_scaling_check
// ---------------------------------------------------------------------------

ZScalingReport z_scaling_check(const Learner& learner, const Dgp& dgp,
                               std::span<const std::size_t> n_grid, std::size_t reps,
                               std::uint64_t master_seed, std::size_t k_folds) {
  validate(dgp);
  if (!learner.declared_rate()) {
    throw Error(Errc::invalid_input, "z_scaling_check requires a declared-rate learner");
  }
  check_grid(n_grid);
  if (reps < 1) throw Error(Errc::invalid_input, "z_scaling_check: reps >= 1");
  if (k_folds < 2 || k_folds > n_grid.front()) {
    throw Error(Errc::invalid_input, "z_scaling_check: need 2 <= k_folds <= min(n_grid)");
  }

  ZScalingReport report;
  report.learner = learner.name();
  report.gamma = learner.declared_rate()->gamma;
  report.reps = reps;
  report.k_folds = k_folds;
  report.n_grid.assign(n_grid.begin(), n_grid.end());
  report.z_target = -(0.5 + report.gamma);
  report.delta_target = -2.0 * report.gamma;

  for (const std::size_t n : n_grid) {
    double z_sq = 0.0;
    double delta = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Dataset data =
          sample_dataset(dgp, n, rng::derive(master_seed, {rng::stream::dataset, r, n}));
      const FoldAssignment folds =
          make_folds(n, k_folds, rng::derive(master_seed, {rng::stream::folds, r, n}));
      const CvDecomposition dec = decompose(
          learner, data, folds, dgp.mu, rng::derive(master_seed, {rng::stream::evaluation, r, n}));
      z_sq += dec.z * dec.z;
      delta += dec.delta_sq;
    }
    report.rms_z.push_back(std::sqrt(z_sq / static_cast<double>(reps)));
    report.mean_delta_sq.push_back(delta / static_cast<double>(reps));
  }

  for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
    if (!(report.rms_z[i] > 0.0) || !(report.mean_delta_sq[i] > 0.0)) {
      report.degenerate = true;  // e.g. an exact-oracle learner: z is identically zero
      return report;
    }
  }

  std::vector<double> log_n;
  std::vector<double> log_rms;
  std::vector<double> log_delta;
  for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
    log_n.push_back(std::log(static_cast<double>(report.n_grid[i])));
    log_rms.push_back(std::log(report.rms_z[i]));
    log_delta.push_back(std::log(report.mean_delta_sq[i]));
  }
  const LineFit z_fit = fit_line(log_n, log_rms);
  const LineFit d_fit = fit_line(log_n, log_delta);
  report.z_slope = z_fit.slope;
  report.z_slope_se = z_fit.slope_se;
  report.delta_slope = d_fit.slope;
  report.delta_slope_se = d_fit.slope_se;
  return report;
}

std::string ZScalingReport::to_text() const {
  std::string out;
  kv(out, "report", std::string("zscaling"));
  kv(out, "learner", learner);
  kv(out, "gamma", gamma);
  kv(out, "reps", reps);
  kv(out, "k_folds", k_folds);
  kv(out, "degenerate", std::string(degenerate ? "true" : "false"));
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    kv(out, "rms_z.n" + std::to_string(n_grid[i]), rms_z[i]);
  }
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    kv(out, "mean_delta_sq.n" + std::to_string(n_grid[i]), mean_delta_sq[i]);
  }
  if (!degenerate) {
    kv(out, "z_slope", z_slope);
    kv(out, "z_slope_se", z_slope_se);
    kv(out, "z_slope_target", z_target);
    kv(out, "delta_slope", delta_slope);
    kv(out, "delta_slope_se", delta_slope_se);
    kv(out, "delta_slope_target", delta_target);
  }
  return out;
}

// ---------------------------------------------------------------------------
// paired_summary
// ---------------------------------------------------------------------------

PairedSummary paired_summary(const ReplicationTable& table) {
  const auto names = table.learner_names();
  const auto ns = table.n_values();
  if (names.size() != 2 || ns.size() != 1) {
    throw Error(Errc::invalid_input,
                "paired_summary expects two learners at a single n; filter the table first");
  }
  const PairedRows pairs = pair_rows(table, names[0], names[1], ns[0]);
  const std::size_t reps = pairs.a.size();
  if (reps < 10) {
    throw Error(Errc::insufficient_data,
                "paired_summary needs >= 10 replications, got " + std::to_string(reps));
  }

  PairedSummary summary;
  summary.learner_a = names[0];
  summary.learner_b = names[1];
  summary.n = ns[0];
  summary.replications = reps;

  std::vector<double> cv_a(reps);
  std::vector<double> cv_b(reps);
  std::vector<double> or_a(reps);
  std::vector<double> or_b(reps);
  std::vector<double> diff_cv(reps);
  std::vector<double> diff_or(reps);
  summary.scatter.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    cv_a[r] = pairs.a[r]->cv_total;
    cv_b[r] = pairs.b[r]->cv_total;
    or_a[r] = pairs.a[r]->oracle_excess_risk;
    or_b[r] = pairs.b[r]->oracle_excess_risk;
    diff_cv[r] = cv_b[r] - cv_a[r];
    diff_or[r] = or_b[r] - or_a[r];
    summary.scatter.push_back({pairs.a[r]->replication, cv_a[r], cv_b[r]});
  }

  const MeanVar mva = mean_var(cv_a);
  const MeanVar mvb = mean_var(cv_b);
  const MeanVar moa = mean_var(or_a);
  const MeanVar mob = mean_var(or_b);
  summary.mean_cv_a = mva.mean;
  summary.mean_cv_b = mvb.mean;
  summary.sd_cv_a = std::sqrt(mva.var);
  summary.sd_cv_b = std::sqrt(mvb.var);
  summary.mean_oracle_a = moa.mean;
  summary.mean_oracle_b = mob.mean;
  summary.sd_oracle_a = std::sqrt(moa.var);
  summary.sd_oracle_b = std::sqrt(mob.var);

  // Pearson correlation of the paired cv_total values
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const double da = cv_a[r] - mva.mean;
    const double db = cv_b[r] - mvb.mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa > 0.0 && sbb > 0.0) {
    summary.pearson_cv = sab / std::sqrt(saa * sbb);
  } else {
    summary.pearson_degenerate = true;
    summary.pearson_cv = kNaN;
  }

  // shared-edge histogram over both difference series
  double lo = diff_cv[0];
  double hi = diff_cv[0];
  for (double v : diff_cv) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : diff_or) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  constexpr std::size_t kBins = 30;
  if (lo == hi) {
    HistBin bin{lo - 0.5, hi + 0.5, reps, reps};
    summary.diff_hist.push_back(bin);
  } else {
    const double width = (hi - lo) / static_cast<double>(kBins);
    summary.diff_hist.resize(kBins);
    for (std::size_t b = 0; b < kBins; ++b) {
      summary.diff_hist[b].lo = lo + width * static_cast<double>(b);
      summary.diff_hist[b].hi = lo + width * static_cast<double>(b + 1);
    }
    auto bin_of = [&](double v) {
      const auto b = static_cast<std::size_t>((v - lo) / width);
      return std::min(b, kBins - 1);  // right edge closes the last bin
    };
    for (double v : diff_cv) ++summary.diff_hist[bin_of(v)].count_cv;
    for (double v : diff_or) ++summary.diff_hist[bin_of(v)].count_oracle;
  }
  return summary;
}

std::string PairedSummary::to_text() const {
  std::string out;
  kv(out, "report", std::string("paired"));
  kv(out, "learner_a", learner_a);
  kv(out, "learner_b", learner_b);
  kv(out, "n", n);
  kv(out, "replications", replications);
  kv(out, "mean_cv_a", mean_cv_a);
  kv(out, "mean_cv_b", mean_cv_b);
  kv(out, "sd_cv_a", sd_cv_a);
  kv(out, "sd_cv_b", sd_cv_b);
  kv(out, "mean_oracle_a", mean_oracle_a);
  kv(out, "mean_oracle_b", mean_oracle_b);
  kv(out, "sd_oracle_a", sd_oracle_a);
  kv(out, "sd_oracle_b", sd_oracle_b);
  kv(out, "pearson_cv", pearson_cv);
  kv(out, "pearson_degenerate", std::string(pearson_degenerate ? "true" : "false"));
  return out;
}

void write_paired_hist_csv(const PairedSummary& summary, std::ostream& out) {
  out << "bin_lo,bin_hi,count_cv_diff,count_oracle_diff\n";
  for (const auto& bin : summary.diff_hist) {
    out << csv::format_double(bin.lo) << ',' << csv::format_double(bin.hi) << ',' << bin.count_cv
        << ',' << bin.count_oracle << '\n';
  }
}

void write_paired_scatter_csv(const PairedSummary& summary, std::ostream& out) {
  out << "replication,cv_" << summary.learner_a << ",cv_" << summary.learner_b << '\n';
  for (const auto& pt : summary.scatter) {
    out << pt.replication << ',' << csv::format_double(pt.cv_a) << ','
        << csv::format_double(pt.cv_b) << '\n';
  }
}

}  // namespace cvlab
