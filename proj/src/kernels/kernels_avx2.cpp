// AVX2 + FMA kernel backend. This translation unit is compiled with
// -mavx2 -mfma on x86-64 targets only; callers must check supported()
// before invoking anything here.

#include "cvlab/kernels.hpp"

#if defined(CVLAB_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace cvlab::kernels::avx2 {

namespace {

// Fixed reduction order (v0+v2)+(v1+v3): keeps results bit-reproducible.
inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

double sum(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
  }
  if (i + 4 <= n) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  if (i + 4 <= n) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d, d, acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s = std::fma(d, d, s);
  }
  return s;
}

// Mirrors sum_sq_diff's accumulation structure exactly, so that when
// pred == mu elementwise, star here equals sum_sq_diff(y, pred) bit for bit
// (the cv_total == cv_star contract for an oracle predictor).
DecompSums decomp_sums(const double* y, const double* mu, const double* pred, std::size_t n) {
  __m256d star0 = _mm256_setzero_pd(), star1 = _mm256_setzero_pd();
  __m256d cross0 = _mm256_setzero_pd(), cross1 = _mm256_setzero_pd();
  __m256d gap0 = _mm256_setzero_pd(), gap1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d ma = _mm256_loadu_pd(mu + i);
    const __m256d mb = _mm256_loadu_pd(mu + i + 4);
    const __m256d ea = _mm256_sub_pd(_mm256_loadu_pd(y + i), ma);
    const __m256d eb = _mm256_sub_pd(_mm256_loadu_pd(y + i + 4), mb);
    const __m256d ga = _mm256_sub_pd(ma, _mm256_loadu_pd(pred + i));
    const __m256d gb = _mm256_sub_pd(mb, _mm256_loadu_pd(pred + i + 4));
    star0 = _mm256_fmadd_pd(ea, ea, star0);
    star1 = _mm256_fmadd_pd(eb, eb, star1);
    cross0 = _mm256_fmadd_pd(ea, ga, cross0);
    cross1 = _mm256_fmadd_pd(eb, gb, cross1);
    gap0 = _mm256_fmadd_pd(ga, ga, gap0);
    gap1 = _mm256_fmadd_pd(gb, gb, gap1);
  }
  if (i + 4 <= n) {
    const __m256d m = _mm256_loadu_pd(mu + i);
    const __m256d e = _mm256_sub_pd(_mm256_loadu_pd(y + i), m);
    const __m256d g = _mm256_sub_pd(m, _mm256_loadu_pd(pred + i));
    star0 = _mm256_fmadd_pd(e, e, star0);
    cross0 = _mm256_fmadd_pd(e, g, cross0);
    gap0 = _mm256_fmadd_pd(g, g, gap0);
    i += 4;
  }
  DecompSums out{hsum(_mm256_add_pd(star0, star1)), hsum(_mm256_add_pd(cross0, cross1)),
                 hsum(_mm256_add_pd(gap0, gap1))};
  for (; i < n; ++i) {
    const double e = y[i] - mu[i];
    const double g = mu[i] - pred[i];
    out.star = std::fma(e, e, out.star);
    out.cross = std::fma(e, g, out.cross);
    out.gap = std::fma(g, g, out.gap);
  }
  return out;
}

void sq_dists(const double* rows, std::size_t n, std::size_t p, const double* query, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = rows + i * p;
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= p; j += 4) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(r + j), _mm256_loadu_pd(query + j));
      acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; j < p; ++j) {
      const double d = r[j] - query[j];
      s = std::fma(d, d, s);
    }
    out[i] = s;
  }
}

WeightedSums weighted_sums(const double* w, const double* y, std::size_t n) {
  __m256d wy = _mm256_setzero_pd();
  __m256d ws = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wv = _mm256_loadu_pd(w + i);
    wy = _mm256_fmadd_pd(wv, _mm256_loadu_pd(y + i), wy);
    ws = _mm256_add_pd(ws, wv);
  }
  WeightedSums out{hsum(wy), hsum(ws)};
  for (; i < n; ++i) {
    out.wy = std::fma(w[i], y[i], out.wy);
    out.w += w[i];
  }
  return out;
}

}  // namespace

bool supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

extern const Ops ops = {
    "avx2", &sum, &dot, &sum_sq_diff, &decomp_sums, &sq_dists, &weighted_sums,
};

}  // namespace cvlab::kernels::avx2

#endif  // CVLAB_HAVE_AVX2
