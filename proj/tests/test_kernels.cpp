#include <doctest.h>

#include <cmath>
#include <vector>

#include "cvlab/error.hpp"
#include "cvlab/kernels.hpp"
#include "cvlab/rng.hpp"

using namespace cvlab;

namespace {

std::vector<double> random_vec(rng::Rng& gen, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * gen.normal();
  return v;
}

// |a - b| <= tol * (scale of the summed terms): reassociation-safe bound
void check_close(double got, double want, double term_scale) {
  const double tol = 1e-12 * term_scale + 1e-300;
  CHECK(std::abs(got - want) <= tol);
}

}  // namespace

TEST_CASE("kernel backends agree with the scalar reference") {
  const auto& ref = kernels::backend_ops(kernels::Backend::scalar);
  const std::vector<std::size_t> sizes = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 64, 1000, 1537};

  for (const auto backend : kernels::available_backends()) {
    const auto& ops = kernels::backend_ops(backend);
    INFO("backend: ", ops.name);
    rng::Rng gen(42);
    for (const std::size_t n : sizes) {
      const auto a = random_vec(gen, n, 2.0);
      const auto b = random_vec(gen, n, 2.0);
      const auto c = random_vec(gen, n, 2.0);

      double abs_sum = 0.0;
      for (double x : a) abs_sum += std::abs(x);
      check_close(ops.sum(a.data(), n), ref.sum(a.data(), n), abs_sum);

      double abs_dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) abs_dot += std::abs(a[i] * b[i]);
      check_close(ops.dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), abs_dot);

      double abs_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) abs_sq += (a[i] - b[i]) * (a[i] - b[i]);
      check_close(ops.sum_sq_diff(a.data(), b.data(), n), ref.sum_sq_diff(a.data(), b.data(), n),
                  abs_sq);

      const auto ds = ops.decomp_sums(a.data(), b.data(), c.data(), n);
      const auto ds_ref = ref.decomp_sums(a.data(), b.data(), c.data(), n);
      double star_scale = 0.0;
      double cross_scale = 0.0;
      double gap_scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = a[i] - b[i];
        const double g = b[i] - c[i];
        star_scale += e * e;
        cross_scale += std::abs(e * g);
        gap_scale += g * g;
      }
      check_close(ds.star, ds_ref.star, star_scale);
      check_close(ds.cross, ds_ref.cross, cross_scale);
      check_close(ds.gap, ds_ref.gap, gap_scale);

      const auto ws = ops.weighted_sums(a.data(), b.data(), n);
      const auto ws_ref = ref.weighted_sums(a.data(), b.data(), n);
      check_close(ws.wy, ws_ref.wy, abs_dot);
      check_close(ws.w, ws_ref.w, abs_sum);
    }

    // distance batches over a small matrix
    rng::Rng gen2(7);
    for (const std::size_t p : {1ul, 2ul, 3ul, 4ul, 5ul, 10ul, 13ul}) {
      const std::size_t rows = 37;
      const auto m = random_vec(gen2, rows * p);
      const auto q = random_vec(gen2, p);
      std::vector<double> got(rows);
      std::vector<double> want(rows);
      ops.sq_dists(m.data(), rows, p, q.data(), got.data());
      ref.sq_dists(m.data(), rows, p, q.data(), want.data());
      for (std::size_t i = 0; i < rows; ++i) check_close(got[i], want[i], want[i] + 1.0);
    }
  }
}

TEST_CASE("decomp_sums star equals sum_sq_diff bit for bit when pred == mu") {
  rng::Rng gen(11);
  const std::size_t n = 203;
  const auto y = random_vec(gen, n);
  const auto mu = random_vec(gen, n);
  for (const auto backend : kernels::available_backends()) {
    const auto& ops = kernels::backend_ops(backend);
    INFO("backend: ", ops.name);
    const auto ds = ops.decomp_sums(y.data(), mu.data(), mu.data(), n);
    CHECK(ds.star == ops.sum_sq_diff(y.data(), mu.data(), n));
    CHECK(ds.cross == 0.0);
    CHECK(ds.gap == 0.0);
  }
}

TEST_CASE("kernels are deterministic per backend") {
  rng::Rng gen(3);
  const auto a = random_vec(gen, 513);
  const auto b = random_vec(gen, 513);
  for (const auto backend : kernels::available_backends()) {
    const auto& ops = kernels::backend_ops(backend);
    CHECK(ops.sum_sq_diff(a.data(), b.data(), a.size()) ==
          ops.sum_sq_diff(a.data(), b.data(), a.size()));
    CHECK(ops.dot(a.data(), b.data(), a.size()) == ops.dot(a.data(), b.data(), a.size()));
  }
}

TEST_CASE("backend selection") {
  const auto original = kernels::active_backend();
  CHECK(kernels::set_backend(kernels::Backend::scalar));
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  CHECK(kernels::backend_name(kernels::Backend::scalar) == "scalar");
  CHECK_THROWS_AS((void)kernels::parse_backend("turbo"), Error);
  // "auto" resolves to something available
  CHECK(kernels::backend_available(kernels::parse_backend("auto")));
  CHECK(kernels::set_backend(original));
}
