#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "cvlab/crossval.hpp"
#include "cvlab/error.hpp"
#include "cvlab/learners.hpp"
#include "cvlab/rng.hpp"

using namespace cvlab;

namespace {

// decomposition identity residual, relative to the scale of the terms
double identity_residual(const CvDecomposition& dec) {
  const double lhs = dec.cv_total;
  const double rhs = dec.cv_star + 2.0 * dec.z + dec.delta_sq;
  const double scale =
      std::max({1e-30, std::abs(lhs), std::abs(dec.cv_star) + 2.0 * std::abs(dec.z) +
                                          std::abs(dec.delta_sq)});
  return std::abs(lhs - rhs) / scale;
}

}  // namespace

TEST_CASE("make_folds satisfies the partition invariants") {
  SUBCASE("n=10 K=5: all sizes 2") {
    const FoldAssignment folds = make_folds(10, 5, 1);
    for (const auto s : folds.sizes) CHECK(s == 2);
  }
  SUBCASE("n=10 K=3: sizes {4,3,3} in some order") {
    const FoldAssignment folds = make_folds(10, 3, 2);
    std::multiset<std::size_t> sizes(folds.sizes.begin(), folds.sizes.end());
    CHECK(sizes == std::multiset<std::size_t>{3, 3, 4});
  }
  SUBCASE("n=5 K=5: leave-one-out") {
    const FoldAssignment folds = make_folds(5, 5, 3);
    for (const auto s : folds.sizes) CHECK(s == 1);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS((void)make_folds(10, 1, 0), Error);
    CHECK_THROWS_AS((void)make_folds(10, 11, 0), Error);
  }
  SUBCASE("randomized invariants") {
    rng::Rng gen(4);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + gen.uniform_below(200);
      const std::size_t k = 2 + gen.uniform_below(n - 1);
      const FoldAssignment folds = make_folds(n, k, gen.next_u64());
      REQUIRE(folds.fold_of.size() == n);
      std::vector<std::size_t> counts(k, 0);
      for (const auto f : folds.fold_of) {
        REQUIRE(f < k);
        ++counts[f];
      }
      std::size_t lo = n;
      std::size_t hi = 0;
      for (std::size_t f = 0; f < k; ++f) {
        CHECK(counts[f] == folds.sizes[f]);
        CHECK(folds.train_sizes[f] == n - folds.sizes[f]);
        CHECK(folds.members[f].size() == folds.sizes[f]);
        lo = std::min(lo, counts[f]);
        hi = std::max(hi, counts[f]);
      }
      CHECK(hi - lo <= 1);  // evenly sized
      // members ascending, consistent with fold_of
      for (std::size_t f = 0; f < k; ++f) {
        for (std::size_t i = 0; i < folds.members[f].size(); ++i) {
          if (i > 0) CHECK(folds.members[f][i - 1] < folds.members[f][i]);
          CHECK(folds.fold_of[folds.members[f][i]] == f);
        }
      }
    }
  }
}

TEST_CASE("cross_validate on trivial cases") {
  SUBCASE("constant-zero learner, all responses zero") {
    Dataset data(6, 2);
    const FoldAssignment folds = make_folds(6, 3, 1);
    CHECK(cross_validate(constant_learner(0.0), data, folds, 0) == 0.0);
  }
  SUBCASE("constant-zero learner, responses (1,-1,1,-1)") {
    Dataset data(4, 2);
    data.y(0) = 1.0;
    data.y(1) = -1.0;
    data.y(2) = 1.0;
    data.y(3) = -1.0;
    const FoldAssignment folds = make_folds(4, 2, 1);
    CHECK(cross_validate(constant_learner(0.0), data, folds, 0) == 1.0);
  }
  SUBCASE("fold/dataset size mismatch") {
    Dataset data(6, 2);
    const FoldAssignment folds = make_folds(5, 2, 1);
    CHECK_THROWS_AS((void)cross_validate(constant_learner(0.0), data, folds, 0), Error);
  }
}

TEST_CASE("oracle learner: cv equals the direct residual recomputation") {
  const Dgp dgp = make_eq1_dgp(6);
  const Dataset data = sample_dataset(dgp, 90, 13);
  const FoldAssignment folds = make_folds(90, 9, 14);
  const Learner oracle = synthetic_learner(0.3, 0.0, dgp);
  const double cv = cross_validate(oracle, data, folds, 15);
  double want = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double e = data.y(i) - mu_rt(data.row(i));
    want += e * e;
  }
  want /= static_cast<double>(data.n());
  CHECK(cv == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("decompose: oracle learner collapses to cv_star") {
  const Dgp dgp = make_eq1_dgp(4);
  const Dataset data = sample_dataset(dgp, 48, 21);
  const FoldAssignment folds = make_folds(48, 6, 22);
  const Learner oracle = synthetic_learner(0.4, 0.0, dgp);
  const CvDecomposition dec = decompose(oracle, data, folds, dgp.mu, 23);
  CHECK(dec.z == 0.0);
  CHECK(dec.delta_sq == 0.0);
  CHECK(dec.cv_total == dec.cv_star);  // bitwise: identical accumulation path
  CHECK(dec.cv_total == cross_validate(oracle, data, folds, 23));
}

TEST_CASE("decompose: zero mean and constant-zero learner") {
  const Dgp dgp = make_zero_dgp(3, 1.0);
  const Dataset data = sample_dataset(dgp, 30, 31);
  const FoldAssignment folds = make_folds(30, 5, 32);
  const CvDecomposition dec = decompose(constant_learner(0.0), data, folds, dgp.mu, 33);
  double mean_y_sq = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) mean_y_sq += data.y(i) * data.y(i);
  mean_y_sq /= static_cast<double>(data.n());
  CHECK(dec.cv_star == doctest::Approx(mean_y_sq).epsilon(1e-13));
  CHECK(dec.z == 0.0);
  CHECK(dec.delta_sq == 0.0);
}

TEST_CASE("decompose matches a term-by-term brute-force recomputation") {
  const Dgp dgp = make_eq1_dgp(3);
  const Dataset data = sample_dataset(dgp, 40, 41);
  const FoldAssignment folds = make_folds(40, 4, 42);
  const Learner learner = kernel_learner(0.9);
  const std::uint64_t seed = 43;
  const CvDecomposition dec = decompose(learner, data, folds, dgp.mu, seed);

  CHECK(identity_residual(dec) < 1e-10);
  CHECK(dec.delta_sq >= 0.0);
  CHECK(dec.cv_total == cross_validate(learner, data, folds, seed));

  // independent recomputation straight from the definitions, refitting each
  // fold with the documented seed derivation
  double star = 0.0;
  double cross = 0.0;
  double gap = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < folds.k_folds; ++k) {
    std::vector<std::uint32_t> train_rows;
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (folds.fold_of[i] != k) train_rows.push_back(static_cast<std::uint32_t>(i));
    }
    const FittedRule rule =
        learner.fit(data.subset(train_rows), rng::derive(seed, {rng::stream::fold_fit, k}));
    double f_star = 0.0;
    double f_cross = 0.0;
    double f_gap = 0.0;
    double f_total = 0.0;
    for (const std::uint32_t i : folds.members[k]) {
      const double mu = mu_rt(data.row(i));
      const double pred = rule.predict(data.row(i));
      const double e = data.y(i) - mu;
      const double g = mu - pred;
      f_star += e * e;
      f_cross += e * g;
      f_gap += g * g;
      const double d = data.y(i) - pred;
      f_total += d * d;
    }
    CHECK(dec.per_fold[k].ss_star == doctest::Approx(f_star).epsilon(1e-12));
    CHECK(dec.per_fold[k].cross == doctest::Approx(f_cross).epsilon(1e-12));
    CHECK(dec.per_fold[k].ss_gap == doctest::Approx(f_gap).epsilon(1e-12));
    CHECK(dec.per_fold[k].ss_total == doctest::Approx(f_total).epsilon(1e-12));
    star += f_star;
    cross += f_cross;
    gap += f_gap;
    total += f_total;
  }
  const double n = static_cast<double>(data.n());
  CHECK(dec.cv_star == doctest::Approx(star / n).epsilon(1e-12));
  CHECK(dec.z == doctest::Approx(cross / n).epsilon(1e-12));
  CHECK(dec.delta_sq == doctest::Approx(gap / n).epsilon(1e-12));
  CHECK(dec.cv_total == doctest::Approx(total / n).epsilon(1e-12));
}

TEST_CASE("decomposition identity holds across randomized instances") {
  const Dgp dgp = make_eq1_dgp(5);
  rng::Rng gen(55);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 12 + gen.uniform_below(50);
    const std::size_t k = 2 + gen.uniform_below(std::min<std::size_t>(n, 8) - 1);
    const Dataset data = sample_dataset(dgp, n, gen.next_u64());
    const FoldAssignment folds = make_folds(n, k, gen.next_u64());
    Learner learner;
    switch (trial % 4) {
      case 0: learner = synthetic_learner(0.26 + 0.2 * gen.uniform(), 2.0 * gen.uniform(), dgp); break;
      case 1: learner = knn_learner(1 + gen.uniform_below(5)); break;
      case 2: learner = kernel_learner(0.3 + 2.0 * gen.uniform()); break;
      default: learner = constant_learner(gen.normal()); break;
    }
    const CvDecomposition dec = decompose(learner, data, folds, dgp.mu, gen.next_u64());
    CHECK(identity_residual(dec) < 1e-10);
    CHECK(dec.delta_sq >= 0.0);
  }
}

TEST_CASE("held-out samples are invisible to the fit that predicts them") {
  const Dgp dgp = make_eq1_dgp(3);
  const Dataset data = sample_dataset(dgp, 12, 61);
  const FoldAssignment folds = make_folds(12, 3, 62);
  const Learner learner = knn_learner(std::size_t{2});
  const std::vector<double> base = heldout_predictions(learner, data, folds, 63);

  for (std::size_t i = 0; i < data.n(); ++i) {
    Dataset mutated = data;
    mutated.y(i) += 10.0;
    const std::vector<double> preds = heldout_predictions(learner, mutated, folds, 63);
    // every prediction in i's own fold is untouched by the response change
    for (const std::uint32_t j : folds.members[folds.fold_of[i]]) {
      CHECK(preds[j] == base[j]);
    }
  }
}

TEST_CASE("cv_star cancels between learners sharing data, folds, and mu") {
  const Dgp dgp = make_eq1_dgp(6);
  const Dataset data = sample_dataset(dgp, 80, 71);
  const FoldAssignment folds = make_folds(80, 8, 72);
  const Learner a = synthetic_learner(0.45, 1.0, dgp);
  const Learner b = synthetic_learner(0.3, 1.5, dgp);
  const CvDecomposition da = decompose(a, data, folds, dgp.mu, 73);
  const CvDecomposition db = decompose(b, data, folds, dgp.mu, 73);

  CHECK(da.cv_star == db.cv_star);  // bitwise
  const double lhs = da.cv_total - db.cv_total;
  const double rhs = 2.0 * (da.z - db.z) + (da.delta_sq - db.delta_sq);
  const double scale = std::max(1e-30, std::abs(da.cv_total) + std::abs(db.cv_total));
  CHECK(std::abs(lhs - rhs) / scale < 1e-10);
}

TEST_CASE("z is conditionally mean-zero across replications") {
  const Dgp dgp = make_eq1_dgp(4);
  const Learner learner = synthetic_learner(0.3, 1.0, dgp);
  const std::size_t reps = 400;
  double sum_z = 0.0;
  double sum_z_sq = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const Dataset data = sample_dataset(dgp, 200, rng::derive(80, {1, r}));
    const FoldAssignment folds = make_folds(200, 5, rng::derive(80, {2, r}));
    const CvDecomposition dec = decompose(learner, data, folds, dgp.mu, rng::derive(80, {3, r}));
    sum_z += dec.z;
    sum_z_sq += dec.z * dec.z;
  }
  const double mean = sum_z / reps;
  const double var = (sum_z_sq - sum_z * sum_z / reps) / (reps - 1.0);
  const double se = std::sqrt(var / reps);
  CHECK(std::abs(mean) < 4.0 * se);
}

TEST_CASE("oracle_excess_risk oracle cases") {
  const Dgp dgp = make_eq1_dgp(5);

  SUBCASE("rule identical to mu scores zero") {
    const FittedRule rule([](std::span<const double> x) { return mu_rt(x); }, 10);
    const ExcessRisk er = oracle_excess_risk(rule, dgp, 20000, 1);
    CHECK(er.mean == 0.0);
    CHECK(er.std_error == 0.0);
  }

  SUBCASE("synthetic at (c=1, gamma=0.3, n=100) targets 100^-0.6") {
    const Learner learner = synthetic_learner(0.3, 1.0, dgp);
    const Dataset data = sample_dataset(dgp, 100, 2);
    const FittedRule rule = learner.fit(data, 3);
    const double target = std::pow(100.0, -0.6);
    CHECK(target == doctest::Approx(0.063095734448).epsilon(1e-9));
    const ExcessRisk er = oracle_excess_risk(rule, dgp, 200000, 4);
    CHECK(std::abs(er.mean - target) < 4.0 * er.std_error);
  }

  SUBCASE("constant offset of one has unit excess risk") {
    const FittedRule rule([](std::span<const double> x) { return mu_rt(x) + 1.0; }, 10);
    const ExcessRisk er = oracle_excess_risk(rule, dgp, 50000, 5);
    CHECK(std::abs(er.mean - 1.0) < 3.0 * er.std_error + 1e-12);
  }

  SUBCASE("mc_draws must be positive") {
    const FittedRule rule([](std::span<const double>) { return 0.0; }, 10);
    CHECK_THROWS_AS((void)oracle_excess_risk(rule, dgp, 0, 1), Error);
  }
}

TEST_CASE("decomposition csv row schema") {
  CvDecomposition dec;
  dec.cv_total = 1.5;
  dec.cv_star = 1.0;
  dec.z = 0.125;
  dec.delta_sq = 0.25;
  CHECK(decomposition_csv_header() == "replication,learner,n,K,cv_total,cv_star,z,delta_sq");
  CHECK(decomposition_csv_row(3, "knn-k5", 40, 4, dec) == "3,knn-k5,40,4,1.5,1,0.125,0.25");
}
