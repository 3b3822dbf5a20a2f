#include "cvlab/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "cvlab/error.hpp"

namespace cvlab::kernels {

// ---------------------------------------------------------------------------
// Scalar reference kernels. Single left-to-right accumulator; these define
// the semantics the SIMD variants are tested against.
// ---------------------------------------------------------------------------
namespace scalar {

double sum(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

DecompSums decomp_sums(const double* y, const double* mu, const double* pred, std::size_t n) {
  DecompSums out{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - mu[i];    // response noise
    const double g = mu[i] - pred[i]; // fitted rule's error
    out.star += e * e;
    out.cross += e * g;
    out.gap += g * g;
  }
  return out;
}

void sq_dists(const double* rows, std::size_t n, std::size_t p, const double* query, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = rows + i * p;
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double d = r[j] - query[j];
      s += d * d;
    }
    out[i] = s;
  }
}

WeightedSums weighted_sums(const double* w, const double* y, std::size_t n) {
  WeightedSums out{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    out.wy += w[i] * y[i];
    out.w += w[i];
  }
  return out;
}

}  // namespace scalar

static const Ops kScalarOps = {
    "scalar",
    &scalar::sum,
    &scalar::dot,
    &scalar::sum_sq_diff,
    &scalar::decomp_sums,
    &scalar::sq_dists,
    &scalar::weighted_sums,
};

#if defined(CVLAB_HAVE_AVX2)
namespace avx2 {
extern const Ops ops;
bool supported();
}  // namespace avx2
#endif

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(CVLAB_HAVE_AVX2)
      return avx2::supported();
#else
      return false;
#endif
  }
  return false;
}

const Ops& backend_ops(Backend b) {
  switch (b) {
    case Backend::scalar:
      return kScalarOps;
    case Backend::avx2:
#if defined(CVLAB_HAVE_AVX2)
      return avx2::ops;
#else
      break;
#endif
  }
  throw Error(Errc::invalid_config, "kernel backend not compiled into this build");
}

std::vector<Backend> available_backends() {
  std::vector<Backend> v{Backend::scalar};
  if (backend_available(Backend::avx2)) v.push_back(Backend::avx2);
  return v;
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  if (name == "auto") {
    return backend_available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
  }
  throw Error(Errc::invalid_config, "unknown kernel backend '" + std::string(name) +
                                        "' (expected scalar, avx2, or auto)");
}

std::string backend_name(Backend b) { return backend_ops(b).name; }

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("CVLAB_KERNELS")) {
    const Backend b = parse_backend(env);
    if (backend_available(b)) return b;
    // unavailable explicit request falls back to scalar rather than aborting
    return Backend::scalar;
  }
  return parse_backend("auto");
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

const Ops& active() { return backend_ops(backend_slot().load(std::memory_order_relaxed)); }

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

bool set_backend(Backend b) {
  if (!backend_available(b)) return false;
  backend_slot().store(b, std::memory_order_relaxed);
  return true;
}

}  // namespace cvlab::kernels
