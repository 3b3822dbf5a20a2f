#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cvlab/analysis.hpp"
#include "cvlab/error.hpp"

using namespace cvlab;

namespace {

ExperimentConfig synthetic_pair_config() {
  ExperimentConfig config;
  config.dgp = make_eq1_dgp(5);
  config.learners = {synthetic_learner(0.4, 1.0, config.dgp),
                     synthetic_learner(0.3, 1.0, config.dgp)};
  config.n_grid = {40, 80};
  config.k_folds = 4;
  config.replications = 6;
  config.master_seed = 99;
  config.mc_draws_oracle = 500;
  return config;
}

std::string table_bytes(const ReplicationTable& table) {
  std::ostringstream buf;
  write_table_csv(table, buf);
  return buf.str();
}

}  // namespace

TEST_CASE("experiment config validation") {
  ExperimentConfig config = synthetic_pair_config();
  CHECK_NOTHROW(validate(config));

  SUBCASE("bad learner count") {
    config.learners.clear();
    CHECK_THROWS_AS(validate(config), Error);
  }
  SUBCASE("duplicate names") {
    config.learners = {synthetic_learner(0.4, 1.0, config.dgp),
                       synthetic_learner(0.4, 1.0, config.dgp)};
    CHECK_THROWS_AS(validate(config), Error);
  }
  SUBCASE("non-increasing grid") {
    config.n_grid = {80, 80};
    CHECK_THROWS_AS(validate(config), Error);
  }
  SUBCASE("folds exceed smallest n") {
    config.k_folds = 41;
    CHECK_THROWS_AS(validate(config), Error);
  }
  SUBCASE("zero replications") {
    config.replications = 0;
    CHECK_THROWS_AS(validate(config), Error);
  }
}

TEST_CASE("run_replications shape and pairing invariants") {
  const ExperimentConfig config = synthetic_pair_config();
  const ReplicationTable table = run_replications(config);
  REQUIRE(table.rows.size() == config.n_grid.size() * config.replications * 2);

  // row order: n ascending, replication, learner in config order
  std::size_t idx = 0;
  for (const std::size_t n : config.n_grid) {
    for (std::size_t r = 0; r < config.replications; ++r) {
      for (const auto& learner : config.learners) {
        const auto& row = table.rows[idx++];
        CHECK(row.n == n);
        CHECK(row.replication == r);
        CHECK(row.learner == learner.name());
      }
    }
  }

  // cv_star is identical across learners within each (replication, n) cell
  for (std::size_t i = 0; i < table.rows.size(); i += 2) {
    CHECK(table.rows[i].cv_star == table.rows[i + 1].cv_star);
  }

  // single-learner table has one row per (n, replication)
  ExperimentConfig single = config;
  single.learners = {synthetic_learner(0.4, 1.0, config.dgp)};
  single.replications = 1;
  const ReplicationTable t2 = run_replications(single);
  CHECK(t2.rows.size() == single.n_grid.size());
}

TEST_CASE("run_replications is reproducible and worker-count invariant") {
  const ExperimentConfig config = synthetic_pair_config();
  const std::string serial = table_bytes(run_replications(config, 1));
  const std::string threaded = table_bytes(run_replications(config, 3));
  const std::string again = table_bytes(run_replications(config, 1));
  CHECK(serial == threaded);
  CHECK(serial == again);
}

TEST_CASE("table csv round trip") {
  const ReplicationTable table = run_replications(synthetic_pair_config());
  std::stringstream buf;
  write_table_csv(table, buf);
  const ReplicationTable back = read_table_csv(buf);
  REQUIRE(back.rows.size() == table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    CHECK(back.rows[i].replication == table.rows[i].replication);
    CHECK(back.rows[i].n == table.rows[i].n);
    CHECK(back.rows[i].learner == table.rows[i].learner);
    CHECK(back.rows[i].cv_total == table.rows[i].cv_total);
    CHECK(back.rows[i].cv_star == table.rows[i].cv_star);
    CHECK(back.rows[i].z == table.rows[i].z);
    CHECK(back.rows[i].delta_sq == table.rows[i].delta_sq);
    CHECK(back.rows[i].oracle_excess_risk == table.rows[i].oracle_excess_risk);
  }
  std::stringstream bad("nope\n");
  CHECK_THROWS_AS((void)read_table_csv(bad), Error);
}

TEST_CASE("forest oob rows appear when requested") {
  ExperimentConfig config;
  config.dgp = make_eq1_dgp(4);
  config.learners = {forest_learner({5, 2, 0.5, 2})};
  config.n_grid = {60};
  config.k_folds = 3;
  config.replications = 3;
  config.master_seed = 5;
  config.mc_draws_oracle = 200;
  config.forest_oob = true;
  const ReplicationTable table = run_replications(config);
  REQUIRE(table.oob_rows.size() == 3);
  for (const auto& row : table.oob_rows) {
    CHECK(row.learner == "forest");
    CHECK(row.n_used + row.n_skipped == 60);
    CHECK(row.oob_error > 0.0);
  }
  std::ostringstream buf;
  write_oob_csv(table, buf);
  CHECK(buf.str().find("replication,n,learner,oob_error,oob_n_used,oob_n_skipped") == 0);
}

TEST_CASE("run_replications tags failures with replication context") {
  ExperimentConfig config;
  config.dgp = make_eq1_dgp(4);
  config.learners = {knn_learner([](std::size_t n) { return n + 1; })};  // always invalid
  config.n_grid = {24};
  config.k_folds = 3;
  config.replications = 2;
  config.master_seed = 1;
  config.mc_draws_oracle = 10;
  try {
    (void)run_replications(config);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_input);
    const std::string what = e.what();
    CHECK(what.find("replication 0") != std::string::npos);
    CHECK(what.find("n=24") != std::string::npos);
    CHECK(what.find("knn") != std::string::npos);
  }
}

TEST_CASE("prop1_check validates its input shape") {
  const ReplicationTable table = run_replications(synthetic_pair_config());
  CHECK_THROWS_AS((void)prop1_check(table, make_eq1_dgp(5)), Error);  // two learners
  const auto slice = table.filter(std::string("synthetic-g0.4-c1"), 40);
  CHECK_THROWS_AS((void)prop1_check(slice, make_eq1_dgp(5)), Error);  // too few reps
}

TEST_CASE("prop1_check on a degenerate noiseless oracle run is all zeros") {
  ExperimentConfig config;
  config.dgp = make_eq1_dgp(4, 0.0);
  config.learners = {synthetic_learner(0.4, 0.0, config.dgp)};
  config.n_grid = {30};
  config.k_folds = 3;
  config.replications = 120;
  config.master_seed = 11;
  config.mc_draws_oracle = 10;
  const ReplicationTable table = run_replications(config);
  const Prop1Report report = prop1_check(table, config.dgp);
  CHECK(report.mean_stat == 0.0);
  CHECK(report.sample_var == 0.0);
  CHECK(report.ks_distance == 0.0);
  CHECK(report.err_star == 0.0);
}

TEST_CASE("prop1_check tracks the clt at moderate scale") {
  ExperimentConfig config;
  config.dgp = make_eq1_dgp(5);
  config.learners = {synthetic_learner(0.4, 1.0, config.dgp)};
  config.n_grid = {400};
  config.k_folds = 5;
  config.replications = 300;
  config.master_seed = 43;
  config.mc_draws_oracle = 100;
  const ReplicationTable table = run_replications(config);
  const Prop1Report report = prop1_check(table, config.dgp);
  CHECK(report.theoretical_var == 2.0);
  CHECK(report.var_ratio > 0.7);
  CHECK(report.var_ratio < 1.3);
  CHECK(std::abs(report.mean_z) < 5.0);
  CHECK(report.ks_pass);
  const std::string text = report.to_text();
  CHECK(text.find("var_ratio = ") != std::string::npos);
}

TEST_CASE("prop2_check on identical learner fits reports degenerate ties") {
  // same spec under two names; shared fit seeds make the fits identical
  ExperimentConfig config;
  config.dgp = make_eq1_dgp(4);
  const Learner base = synthetic_learner(0.35, 1.0, config.dgp);
  config.learners = {Learner("twin-a", [base](const Dataset& d, std::uint64_t s) {
                       return base.fit(d, s);
                     }, base.declared_rate()),
                     Learner("twin-b", [base](const Dataset& d, std::uint64_t s) {
                       return base.fit(d, s);
                     }, base.declared_rate())};
  config.n_grid = {40};
  config.k_folds = 4;
  config.replications = 12;
  config.master_seed = 17;
  config.mc_draws_oracle = 100;
  const ReplicationTable table = run_replications(config);
  const Prop2Report report = prop2_check(table);
  REQUIRE(report.per_n.size() == 1);
  CHECK(report.per_n[0].ties == 12);
  CHECK(report.per_n[0].degenerate);
  CHECK(report.per_n[0].flagged == 12);
  CHECK(std::isnan(report.per_n[0].selection_accuracy));
}

TEST_CASE("prop2_check separates a synthetic rate pair at desk scale") {
  ExperimentConfig config;
  config.dgp = make_eq1_dgp(5);
  config.learners = {synthetic_learner(0.4, 1.0, config.dgp),
                     synthetic_learner(0.28, 1.0, config.dgp)};
  config.n_grid = {100, 800};
  config.k_folds = 5;
  config.replications = 150;
  config.master_seed = 29;
  config.mc_draws_oracle = 100;
  const ReplicationTable table = run_replications(config);
  const Prop2Report report = prop2_check(table, config.learners[0].declared_rate(),
                                          config.learners[1].declared_rate());
  REQUIRE(report.per_n.size() == 2);
  for (const auto& per : report.per_n) {
    CHECK(per.mean_better == "synthetic-g0.4-c1");
    CHECK(per.selection_accuracy > 0.8);
    CHECK(per.declared_accuracy == per.selection_accuracy);  // oracle agrees with declared order
    CHECK(per.ties == 0);
  }
  // the ratio statistic concentrates near one at the larger n
  CHECK(report.per_n[1].median_ratio > 0.5);
  CHECK(report.per_n[1].median_ratio < 1.5);
  CHECK(report.per_n[1].selection_accuracy >= report.per_n[0].selection_accuracy - 0.1);
}

TEST_CASE("prop2_check flags near-zero denominators without dropping accuracy") {
  ReplicationTable table;
  for (std::size_t r = 0; r < 4; ++r) {
    ReplicationRow a;
    a.replication = r;
    a.n = 10;
    a.learner = "a";
    a.cv_total = 1.0;
    a.delta_sq = 0.5;
    ReplicationRow b = a;
    b.learner = "b";
    b.cv_total = 1.5;
    b.delta_sq = r == 0 ? 0.5 + 1e-16 : 0.9;  // one near-zero (but nonzero) denominator
    table.rows.push_back(a);
    table.rows.push_back(b);
  }
  const Prop2Report report = prop2_check(table);
  REQUIRE(report.per_n.size() == 1);
  CHECK(report.per_n[0].flagged == 1);
  CHECK(report.per_n[0].ties == 0);
  CHECK(report.per_n[0].replications == 4);
  CHECK(report.per_n[0].selection_accuracy == 1.0);
  CHECK(report.per_n[0].median_ratio == doctest::Approx(1.25));
}

TEST_CASE("rate_estimate recovers gamma and rejects bad input") {
  const Dgp dgp = make_eq1_dgp(4);

  SUBCASE("grid validation") {
    const Learner learner = synthetic_learner(0.4, 1.0, dgp);
    const std::vector<std::size_t> short_grid = {100, 400};
    CHECK_THROWS_AS((void)rate_estimate(learner, dgp, short_grid, 2, 1), Error);
    const std::vector<std::size_t> narrow = {100, 200, 400};
    CHECK_THROWS_AS((void)rate_estimate(learner, dgp, narrow, 2, 1), Error);
  }

  SUBCASE("zero excess risk is a log-domain error") {
    const Learner oracle = synthetic_learner(0.4, 0.0, dgp);
    const std::vector<std::size_t> grid = {100, 400, 1600};
    CHECK_THROWS_AS((void)rate_estimate(oracle, dgp, grid, 1, 1, 100), Error);
    try {
      (void)rate_estimate(oracle, dgp, grid, 1, 1, 100);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::log_domain);
    }
  }

  SUBCASE("recovery for gamma = 0.4") {
    const Learner learner = synthetic_learner(0.4, 1.0, dgp);
    const std::vector<std::size_t> grid = {100, 400, 1600};
    const RateReport report = rate_estimate(learner, dgp, grid, 2, 7, 20000);
    CHECK(std::abs(report.gamma_hat - 0.4) < 0.03);
    CHECK(report.mean_excess.size() == 3);
    CHECK(report.to_text().find("gamma_hat = ") != std::string::npos);
  }
}

TEST_CASE("z_scaling_check targets and degenerate case") {
  const Dgp dgp = make_eq1_dgp(4);

  SUBCASE("declared rate required") {
    const std::vector<std::size_t> grid = {100, 400, 1600};
    CHECK_THROWS_AS((void)z_scaling_check(knn_learner(std::size_t{3}), dgp, grid, 5, 1), Error);
  }

  SUBCASE("c = 0 reports degenerate") {
    const Learner oracle = synthetic_learner(0.4, 0.0, dgp);
    const std::vector<std::size_t> grid = {100, 400, 1600};
    const ZScalingReport report = z_scaling_check(oracle, dgp, grid, 5, 1, 5);
    CHECK(report.degenerate);
  }

  SUBCASE("slopes near the declared targets") {
    const Learner learner = synthetic_learner(0.35, 1.0, dgp);
    const std::vector<std::size_t> grid = {100, 400, 1600};
    const ZScalingReport report = z_scaling_check(learner, dgp, grid, 300, 13, 5);
    CHECK(!report.degenerate);
    CHECK(report.z_target == doctest::Approx(-0.85));
    CHECK(report.delta_target == doctest::Approx(-0.7));
    CHECK(std::abs(report.z_slope - report.z_target) < 0.08);
    CHECK(std::abs(report.delta_slope - report.delta_target) < 0.05);
  }
}

TEST_CASE("paired_summary shapes, degeneracy, and errors") {
  SUBCASE("insufficient replications") {
    ExperimentConfig config = synthetic_pair_config();
    config.replications = 5;
    config.n_grid = {40};
    const ReplicationTable table = run_replications(config);
    CHECK_THROWS_AS((void)paired_summary(table), Error);
  }

  SUBCASE("requires a single n") {
    const ReplicationTable table = run_replications(synthetic_pair_config());
    CHECK_THROWS_AS((void)paired_summary(table), Error);
  }

  SUBCASE("identical learners degenerate") {
    ExperimentConfig config;
    config.dgp = make_eq1_dgp(4);
    const Learner base = synthetic_learner(0.35, 1.0, config.dgp);
    config.learners = {Learner("twin-a", [base](const Dataset& d, std::uint64_t s) {
                         return base.fit(d, s);
                       }),
                       Learner("twin-b", [base](const Dataset& d, std::uint64_t s) {
                         return base.fit(d, s);
                       })};
    config.n_grid = {40};
    config.k_folds = 4;
    config.replications = 12;
    config.master_seed = 3;
    config.mc_draws_oracle = 100;
    const ReplicationTable table = run_replications(config);
    const PairedSummary summary = paired_summary(table);
    CHECK(summary.pearson_degenerate == false);  // cv series still vary across reps
    REQUIRE(summary.diff_hist.size() == 1);      // all differences exactly zero
    CHECK(summary.diff_hist[0].count_cv == 12);
    CHECK(summary.diff_hist[0].count_oracle == 12);
    CHECK(summary.pearson_cv == doctest::Approx(1.0));
  }

  SUBCASE("histogram counts add up and scatter is complete") {
    ExperimentConfig config = synthetic_pair_config();
    config.n_grid = {60};
    config.replications = 25;
    const ReplicationTable table = run_replications(config);
    const PairedSummary summary = paired_summary(table);
    std::size_t cv_count = 0;
    std::size_t oracle_count = 0;
    for (const auto& bin : summary.diff_hist) {
      cv_count += bin.count_cv;
      oracle_count += bin.count_oracle;
    }
    CHECK(cv_count == 25);
    CHECK(oracle_count == 25);
    CHECK(summary.scatter.size() == 25);
    std::ostringstream hist;
    write_paired_hist_csv(summary, hist);
    CHECK(hist.str().find("bin_lo,bin_hi,count_cv_diff,count_oracle_diff") == 0);
    std::ostringstream scatter;
    write_paired_scatter_csv(summary, scatter);
    CHECK(scatter.str().find("replication,cv_") == 0);
  }
}
