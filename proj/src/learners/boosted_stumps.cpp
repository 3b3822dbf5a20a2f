// Least-squares gradient boosting with depth-1 regression stumps. The round
// count is selected by internal K-fold cross-validation: all folds grow in
// lockstep one stump per round, pooled validation error decides, early
// stopping after `patience` non-improving rounds. The returned model is a
// refit on the full data with the chosen round count.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include "cvlab/error.hpp"
#include "cvlab/folds.hpp"
#include "cvlab/learners.hpp"
#include "cvlab/rng.hpp"

namespace cvlab {
namespace {

struct Stump {
  std::uint32_t feature = 0;
  double threshold = std::numeric_limits<double>::infinity();
  double left = 0.0;  // prediction when x[feature] <= threshold
  double right = 0.0;

  double eval(const Dataset& d, std::size_t row) const {
    return d.x(row, feature) <= threshold ? left : right;
  }
  double eval(std::span<const double> x) const { return x[feature] <= threshold ? left : right; }
};

// Least-squares stump fits over a fixed row set; per-feature sort orders are
// computed once and reused every round.
class StumpFitter {
 public:
  StumpFitter(const Dataset& data, std::vector<std::uint32_t> rows)
      : data_(&data), rows_(std::move(rows)), order_(data.p()) {
    const std::size_t m = rows_.size();
    for (std::size_t j = 0; j < data.p(); ++j) {
      auto& ord = order_[j];
      ord.resize(m);
      std::iota(ord.begin(), ord.end(), 0u);
      std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double va = data.x(rows_[a], j);
        const double vb = data.x(rows_[b], j);
        if (va != vb) return va < vb;
        return rows_[a] < rows_[b];
      });
    }
  }

  const std::vector<std::uint32_t>& rows() const { return rows_; }

  // residual[i] belongs to rows()[i]. Candidate thresholds are midpoints of
  // consecutive distinct sorted values; equal gains keep the lowest feature
  // index, then the smallest threshold (scan order guarantees both).
  Stump fit(std::span<const double> residual) const {
    const std::size_t m = rows_.size();
    double total = 0.0;
    for (double r : residual) total += r;

    const double base_score = total * total / static_cast<double>(m);
    double best_score = base_score;
    bool found = false;
    Stump best;
    for (std::size_t j = 0; j < data_->p(); ++j) {
      const auto& ord = order_[j];
      double left_sum = 0.0;
      for (std::size_t t = 0; t + 1 < m; ++t) {
        left_sum += residual[ord[t]];
        const double v0 = data_->x(rows_[ord[t]], j);
        const double v1 = data_->x(rows_[ord[t + 1]], j);
        if (v0 == v1) continue;
        const double nl = static_cast<double>(t + 1);
        const double nr = static_cast<double>(m - t - 1);
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (score > best_score) {
          best_score = score;
          found = true;
          best.feature = static_cast<std::uint32_t>(j);
          double mid = v0 + 0.5 * (v1 - v0);
          if (!(mid < v1)) mid = v0;  // rounding collapsed the midpoint
          best.threshold = mid;
          best.left = left_sum / nl;
          best.right = right_sum / nr;
        }
      }
    }
    if (!found) {
      // no improving split: constant adjustment by the mean residual
      best = Stump{};
      best.left = best.right = total / static_cast<double>(m);
    }
    return best;
  }

 private:
  const Dataset* data_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::vector<std::uint32_t>> order_;  // positions into rows_
};

struct BoostModel {
  double f0 = 0.0;
  double learning_rate = 1.0;
  std::size_t p = 0;
  std::vector<Stump> stumps;

  double predict(std::span<const double> x) const {
    double acc = f0;
    for (const Stump& s : stumps) acc += learning_rate * s.eval(x);
    return acc;
  }
};

double mean_response(const Dataset& data, std::span<const std::uint32_t> rows) {
  double s = 0.0;
  for (std::uint32_t r : rows) s += data.y(r);
  return s / static_cast<double>(rows.size());
}

}  // namespace

Learner boosted_stumps_learner(const BoostConfig& config) {
  if (config.max_rounds < 1) throw Error(Errc::invalid_config, "boosted stumps: max_rounds >= 1");
  if (!(config.learning_rate > 0.0) || !(config.learning_rate <= 1.0)) {
    throw Error(Errc::invalid_config, "boosted stumps: learning_rate in (0, 1]");
  }
  if (config.internal_cv_folds < 2) {
    throw Error(Errc::invalid_config, "boosted stumps: internal_cv_folds >= 2");
  }
  if (config.patience < 1) throw Error(Errc::invalid_config, "boosted stumps: patience >= 1");

  auto fit = [config](const Dataset& data, std::uint64_t seed) -> FittedRule {
    const std::size_t n = data.n();
    if (n == 0) throw Error(Errc::invalid_input, "boosted stumps fit: empty dataset");
    if (n < config.internal_cv_folds) {
      throw Error(Errc::invalid_config, "boosted stumps fit: fewer samples (" + std::to_string(n) +
                                            ") than internal cv folds (" +
                                            std::to_string(config.internal_cv_folds) + ")");
    }
    const double lr = config.learning_rate;

    // internal CV, all folds grown in lockstep
    const FoldAssignment folds =
        make_folds(n, config.internal_cv_folds, rng::derive(seed, {rng::stream::boost_cv}));

    struct FoldState {
      StumpFitter fitter;
      std::vector<double> residual;  // aligned with fitter.rows()
      std::vector<double> val_pred;  // aligned with fold members
    };
    std::vector<FoldState> states;
    states.reserve(folds.k_folds);
    for (std::size_t k = 0; k < folds.k_folds; ++k) {
      std::vector<std::uint32_t> train_rows;
      train_rows.reserve(folds.train_sizes[k]);
      for (std::size_t i = 0; i < n; ++i) {
        if (folds.fold_of[i] != k) train_rows.push_back(static_cast<std::uint32_t>(i));
      }
      const double f0 = mean_response(data, train_rows);
      FoldState st{StumpFitter(data, std::move(train_rows)), {}, {}};
      st.residual.resize(st.fitter.rows().size());
      for (std::size_t i = 0; i < st.residual.size(); ++i) {
        st.residual[i] = data.y(st.fitter.rows()[i]) - f0;
      }
      st.val_pred.assign(folds.sizes[k], f0);
      states.push_back(std::move(st));
    }

    double best_sse = std::numeric_limits<double>::infinity();
    std::size_t best_rounds = 1;
    std::size_t since_best = 0;
    for (std::size_t round = 1; round <= config.max_rounds; ++round) {
      for (std::size_t k = 0; k < folds.k_folds; ++k) {
        FoldState& st = states[k];
        const Stump s = st.fitter.fit(st.residual);
        const auto& rows = st.fitter.rows();
        for (std::size_t i = 0; i < rows.size(); ++i) st.residual[i] -= lr * s.eval(data, rows[i]);
        const auto& members = folds.members[k];
        for (std::size_t i = 0; i < members.size(); ++i) {
          st.val_pred[i] += lr * s.eval(data, members[i]);
        }
      }
      double sse = 0.0;
      for (std::size_t k = 0; k < folds.k_folds; ++k) {
        const auto& members = folds.members[k];
        for (std::size_t i = 0; i < members.size(); ++i) {
          const double d = data.y(members[i]) - states[k].val_pred[i];
          sse += d * d;
        }
      }
      if (sse < best_sse) {
        best_sse = sse;
        best_rounds = round;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        break;
      }
    }

    // refit on all data with the chosen round count
    std::vector<std::uint32_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0u);
    BoostModel model;
    model.f0 = mean_response(data, all_rows);
    model.learning_rate = lr;
    model.p = data.p();
    StumpFitter fitter(data, std::move(all_rows));
    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) residual[i] = data.y(fitter.rows()[i]) - model.f0;
    model.stumps.reserve(best_rounds);
    for (std::size_t round = 0; round < best_rounds; ++round) {
      const Stump s = fitter.fit(residual);
      for (std::size_t i = 0; i < n; ++i) residual[i] -= lr * s.eval(data, fitter.rows()[i]);
      model.stumps.push_back(s);
    }

    auto shared = std::make_shared<const BoostModel>(std::move(model));
    auto predict = [shared](std::span<const double> x) -> double {
      if (x.size() != shared->p) {
        throw Error(Errc::invalid_input, "boosted stumps predict: dimension mismatch");
      }
      return shared->predict(x);
    };
    return FittedRule(std::move(predict), n);
  };

  return Learner("boosted-stumps", std::move(fit));
}

}  // namespace cvlab
