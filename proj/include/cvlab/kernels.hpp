#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Data-parallel inner loops, as scalar reference kernels plus SIMD variants
// selected at runtime. Every arithmetic reduction the estimators depend on
// (sums of squares, the error-decomposition sums, distance batches) goes
// through this table so that scalar and vector builds exercise identical
// code paths everywhere else.
//
// Determinism: each backend fixes its own accumulation order, so results are
// bit-reproducible for a fixed backend. Backends agree with the scalar
// reference to floating-point reassociation error (equivalence-tested);
// they are not bit-identical to each other. The backend is chosen once at
// startup (best available, overridable via the CVLAB_KERNELS environment
// variable or kernels::set_backend) and never depends on thread count.

namespace cvlab::kernels {

enum class Backend { scalar, avx2 };

struct DecompSums {
  double star;   // sum (y_i - mu_i)^2
  double cross;  // sum (y_i - mu_i) * (mu_i - pred_i)
  double gap;    // sum (mu_i - pred_i)^2
};

struct WeightedSums {
  double wy;  // sum w_i * y_i
  double w;   // sum w_i
};

struct Ops {
  const char* name;
  double (*sum)(const double* a, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
  DecompSums (*decomp_sums)(const double* y, const double* mu, const double* pred, std::size_t n);
  // Squared Euclidean distances from `query` to each row of the row-major
  // n-by-p matrix `rows`.
  void (*sq_dists)(const double* rows, std::size_t n, std::size_t p, const double* query, double* out);
  WeightedSums (*weighted_sums)(const double* w, const double* y, std::size_t n);
};

const Ops& backend_ops(Backend b);
bool backend_available(Backend b);
std::vector<Backend> available_backends();

// Active backend used by the rest of the library.
const Ops& active();
Backend active_backend();
bool set_backend(Backend b);  // false (and no change) if unavailable

// Accepts "scalar", "avx2", "auto". Throws cvlab::Error(invalid_config) on
// anything else; "auto" selects the best available backend.
Backend parse_backend(std::string_view name);
std::string backend_name(Backend b);

}  // namespace cvlab::kernels
