// Subsampled regression forest: num_trees CART-style trees, each grown on an
// in-bag subsample drawn without replacement, with mtry random split
// candidates per node. In-bag index sets are recorded per tree to support
// out-of-bag evaluation. Growing is depth-first with stable partitions, so a
// tree is a pure function of (data, tree seed).

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include "cvlab/error.hpp"
#include "cvlab/learners.hpp"
#include "cvlab/rng.hpp"

namespace cvlab {

double ForestFit::tree_predict(std::size_t t, std::span<const double> x) const {
  const std::vector<TreeNode>& tree = trees_[t];
  std::size_t node = 0;
  while (tree[node].left >= 0) {
    node = x[tree[node].feature] <= tree[node].threshold
               ? static_cast<std::size_t>(tree[node].left)
               : static_cast<std::size_t>(tree[node].right);
  }
  return tree[node].value;
}

double ForestFit::predict(std::span<const double> x) const {
  double acc = 0.0;
  for (std::size_t t = 0; t < trees_.size(); ++t) acc += tree_predict(t, x);
  return acc / static_cast<double>(trees_.size());
}

namespace {

struct SplitChoice {
  bool found = false;
  std::uint32_t feature = 0;
  double threshold = 0.0;
  std::size_t n_left = 0;
};

class TreeGrower {
 public:
  TreeGrower(const Dataset& data, std::size_t min_leaf, std::size_t mtry, rng::Rng& gen)
      : data_(data), min_leaf_(min_leaf), mtry_(mtry), gen_(gen) {}

  std::vector<TreeNode> grow(std::vector<std::uint32_t>& idx) {
    nodes_.clear();
    grow_range(idx, 0, idx.size());
    return std::move(nodes_);
  }

 private:
  std::int32_t grow_range(std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi) {
    const std::size_t m = hi - lo;
    const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();

    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += data_.y(idx[i]);
    const double mean = sum / static_cast<double>(m);

    SplitChoice split;
    if (m >= 2 * min_leaf_) {
      // candidate features drawn per node, scanned in ascending index order
      const auto candidates = gen_.sample_without_replacement(data_.p(), mtry_);
      split = best_split(idx, lo, hi, candidates, sum);
    }
    if (!split.found) {
      nodes_[self].value = mean;
      return self;
    }

    const std::uint32_t j = split.feature;
    const double thr = split.threshold;
    // stable partition keeps ascending row order inside both children
    std::stable_partition(idx.begin() + lo, idx.begin() + hi,
                          [&](std::uint32_t r) { return data_.x(r, j) <= thr; });
    nodes_[self].feature = j;
    nodes_[self].threshold = thr;
    const std::int32_t left = grow_range(idx, lo, lo + split.n_left);
    const std::int32_t right = grow_range(idx, lo + split.n_left, hi);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  SplitChoice best_split(const std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi,
                         std::span<const std::uint32_t> candidates, double total) {
    const std::size_t m = hi - lo;
    const double base_score = total * total / static_cast<double>(m);
    double best_score = base_score;
    SplitChoice best;

    std::vector<std::uint32_t> ord(idx.begin() + lo, idx.begin() + hi);
    for (const std::uint32_t j : candidates) {
      std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double va = data_.x(a, j);
        const double vb = data_.x(b, j);
        if (va != vb) return va < vb;
        return a < b;
      });
      double left_sum = 0.0;
      for (std::size_t t = 0; t + 1 < m; ++t) {
        left_sum += data_.y(ord[t]);
        if (t + 1 < min_leaf_ || m - t - 1 < min_leaf_) continue;
        const double v0 = data_.x(ord[t], j);
        const double v1 = data_.x(ord[t + 1], j);
        if (v0 == v1) continue;
        const double nl = static_cast<double>(t + 1);
        const double nr = static_cast<double>(m - t - 1);
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (score > best_score) {
          best_score = score;
          best.found = true;
          best.feature = j;
          double mid = v0 + 0.5 * (v1 - v0);
          if (!(mid < v1)) mid = v0;  // rounding collapsed the midpoint
          best.threshold = mid;
          best.n_left = t + 1;
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  std::size_t min_leaf_;
  std::size_t mtry_;
  rng::Rng& gen_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

Learner forest_learner(const ForestConfig& config) {
  if (config.num_trees < 1) throw Error(Errc::invalid_config, "forest: num_trees >= 1");
  if (config.min_leaf < 1) throw Error(Errc::invalid_config, "forest: min_leaf >= 1");
  if (!(config.subsample > 0.0) || !(config.subsample <= 1.0)) {
    throw Error(Errc::invalid_config, "forest: subsample in (0, 1]");
  }
  if (config.mtry < 1) throw Error(Errc::invalid_config, "forest: mtry >= 1");

  auto fit = [config](const Dataset& data, std::uint64_t seed) -> FittedRule {
    const std::size_t n = data.n();
    if (n == 0) throw Error(Errc::invalid_input, "forest fit: empty dataset");
    if (config.mtry > data.p()) {
      throw Error(Errc::invalid_config, "forest fit: mtry (" + std::to_string(config.mtry) +
                                            ") exceeds feature count (" +
                                            std::to_string(data.p()) + ")");
    }
    const std::size_t bag_size = std::min<std::size_t>(
        n, std::max<std::size_t>(
               1, static_cast<std::size_t>(std::llround(config.subsample * static_cast<double>(n)))));

    std::vector<std::vector<TreeNode>> trees;
    std::vector<std::vector<std::uint32_t>> in_bag;
    trees.reserve(config.num_trees);
    in_bag.reserve(config.num_trees);
    for (std::size_t t = 0; t < config.num_trees; ++t) {
      rng::Rng gen(rng::derive(seed, {rng::stream::tree, t}));
      std::vector<std::uint32_t> bag = gen.sample_without_replacement(n, bag_size);
      in_bag.push_back(bag);  // sorted ascending
      TreeGrower grower(data, config.min_leaf, config.mtry, gen);
      trees.push_back(grower.grow(bag));
    }

    auto shared =
        std::make_shared<const ForestFit>(std::move(trees), std::move(in_bag), n, data.p());
    auto predict = [shared](std::span<const double> x) -> double {
      if (x.size() != shared->p()) {
        throw Error(Errc::invalid_input, "forest predict: dimension mismatch");
      }
      return shared->predict(x);
    };
    return FittedRule(std::move(predict), n, shared);
  };

  return Learner("forest", std::move(fit));
}

OobResult oob_error(const FittedRule& rule, const Dataset& data) {
  const ForestFit* forest = rule.forest();
  if (forest == nullptr) {
    throw Error(Errc::invalid_input, "oob_error: rule was not fit by forest_learner");
  }
  if (forest->n_train() != data.n() || forest->p() != data.p()) {
    throw Error(Errc::invalid_input, "oob_error: rule was not fit on this dataset");
  }
  const std::size_t n = data.n();
  const std::size_t num_trees = forest->num_trees();

  std::vector<std::uint8_t> in_bag(num_trees * n, 0);
  for (std::size_t t = 0; t < num_trees; ++t) {
    for (const std::uint32_t i : forest->in_bag(t)) in_bag[t * n + i] = 1;
  }

  OobResult out;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t t = 0; t < num_trees; ++t) {
      if (in_bag[t * n + i]) continue;
      acc += forest->tree_predict(t, data.row(i));
      ++cnt;
    }
    if (cnt == 0) {
      ++out.n_skipped;
      continue;
    }
    const double d = data.y(i) - acc / static_cast<double>(cnt);
    sse += d * d;
    ++out.n_used;
  }
  if (out.n_used == 0) {
    throw Error(Errc::undefined_oob, "oob_error: every sample is in-bag for every tree");
  }
  out.error = sse / static_cast<double>(out.n_used);
  return out;
}

}  // namespace cvlab
