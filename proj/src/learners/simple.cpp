// k-nearest-neighbor and Nadaraya-Watson learners, plus the constant
// baseline. Both nonparametric learners snapshot the training data and defer
// all work to predict time; distance batches go through the kernel table.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "cvlab/csv.hpp"
#include "cvlab/error.hpp"
#include "cvlab/kernels.hpp"
#include "cvlab/learners.hpp"

namespace cvlab {

Learner knn_learner(std::function<std::size_t(std::size_t)> k_rule) {
  if (!k_rule) throw Error(Errc::invalid_input, "knn_learner: k_rule is not set");

  auto fit = [k_rule](const Dataset& data, std::uint64_t /*seed*/) -> FittedRule {
    if (data.n() == 0) throw Error(Errc::invalid_input, "knn fit: empty dataset");
    const std::size_t n = data.n();
    const std::size_t k = k_rule(n);
    if (k < 1 || k > n) {
      throw Error(Errc::invalid_input, "knn fit: need 1 <= k <= n, got k=" + std::to_string(k) +
                                           ", n=" + std::to_string(n));
    }
    auto train = std::make_shared<const Dataset>(data);

    auto predict = [train, k](std::span<const double> x) -> double {
      const Dataset& d = *train;
      if (x.size() != d.p()) throw Error(Errc::invalid_input, "knn predict: dimension mismatch");
      std::vector<double> dist(d.n());
      kernels::active().sq_dists(d.features_data(), d.n(), d.p(), x.data(), dist.data());
      std::vector<std::uint32_t> idx(d.n());
      std::iota(idx.begin(), idx.end(), 0u);
      // distance ties break toward the lowest training index
      std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                        [&dist](std::uint32_t a, std::uint32_t b) {
                          if (dist[a] != dist[b]) return dist[a] < dist[b];
                          return a < b;
                        });
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += d.y(idx[i]);
      return s / static_cast<double>(k);
    };
    return FittedRule(std::move(predict), n);
  };
  return Learner("knn", std::move(fit));
}

Learner knn_learner(std::size_t k) {
  auto learner = knn_learner([k](std::size_t) { return k; });
  return Learner("knn-k" + std::to_string(k),
                 [learner](const Dataset& d, std::uint64_t s) { return learner.fit(d, s); });
}

Learner kernel_learner(std::function<double(std::size_t)> bandwidth_rule) {
  if (!bandwidth_rule) throw Error(Errc::invalid_input, "kernel_learner: bandwidth_rule is not set");

  auto fit = [bandwidth_rule](const Dataset& data, std::uint64_t /*seed*/) -> FittedRule {
    if (data.n() == 0) throw Error(Errc::invalid_input, "kernel fit: empty dataset");
    const std::size_t n = data.n();
    const double h = bandwidth_rule(n);
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw Error(Errc::invalid_input, "kernel fit: bandwidth must be finite and > 0");
    }
    auto train = std::make_shared<const Dataset>(data);
    const double inv_two_h_sq = 1.0 / (2.0 * h * h);
    const double fallback =
        kernels::active().sum(data.responses().data(), n) / static_cast<double>(n);

    auto predict = [train, inv_two_h_sq, fallback](std::span<const double> x) -> double {
      const Dataset& d = *train;
      if (x.size() != d.p()) throw Error(Errc::invalid_input, "kernel predict: dimension mismatch");
      std::vector<double> w(d.n());
      kernels::active().sq_dists(d.features_data(), d.n(), d.p(), x.data(), w.data());
      for (double& v : w) v = std::exp(-v * inv_two_h_sq);
      const auto sums = kernels::active().weighted_sums(w.data(), d.responses().data(), d.n());
      // all weights underflowed: fall back to the training mean
      if (!(sums.w > 0.0)) return fallback;
      return sums.wy / sums.w;
    };
    return FittedRule(std::move(predict), n);
  };
  return Learner("kernel", std::move(fit));
}

Learner kernel_learner(double bandwidth) {
  auto learner = kernel_learner([bandwidth](std::size_t) { return bandwidth; });
  return Learner("kernel-h" + csv::format_double(bandwidth),
                 [learner](const Dataset& d, std::uint64_t s) { return learner.fit(d, s); });
}

Learner constant_learner(double value) {
  auto fit = [value](const Dataset& data, std::uint64_t /*seed*/) -> FittedRule {
    return FittedRule([value](std::span<const double>) { return value; }, data.n());
  };
  return Learner("constant-" + csv::format_double(value), std::move(fit));
}

}  // namespace cvlab
