#include "kernels_impl.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))

#include <immintrin.h>

#include <cmath>
#include <limits>

#define DSFLOW_AVX2 __attribute__((target("avx2,fma")))

namespace dsflow::simd::detail {
namespace {

DSFLOW_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

DSFLOW_AVX2 inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(x) to within a few ulp on [-708, 709]; exact 0 below, including -inf.
// Range reduction x = n ln2 + r with |r| <= ln2/2, degree-13 Taylor polynomial
// for e^r, then scaling by 2^n through the exponent bits.
DSFLOW_AVX2 inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  // Adding 1.5 * 2^52 rounds to the nearest integer and leaves it in the low mantissa bits.
  const __m256d shift = _mm256_set1_pd(6755399441055744.0);
  const __m256d big = _mm256_fmadd_pd(x, _mm256_set1_pd(1.4426950408889634), shift);
  const __m256d n = _mm256_sub_pd(big, shift);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(0.693145751953125), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);

  // Estrin's scheme keeps the dependency chain short.
  const __m256d r2 = _mm256_mul_pd(r, r);
  const __m256d r4 = _mm256_mul_pd(r2, r2);
  const __m256d r8 = _mm256_mul_pd(r4, r4);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d q0 = _mm256_fmadd_pd(r, one, one);
  const __m256d q1 = _mm256_fmadd_pd(r, _mm256_set1_pd(1.0 / 6.0), _mm256_set1_pd(0.5));
  const __m256d q2 = _mm256_fmadd_pd(r, _mm256_set1_pd(1.0 / 120.0), _mm256_set1_pd(1.0 / 24.0));
  const __m256d q3 = _mm256_fmadd_pd(r, _mm256_set1_pd(1.0 / 5040.0), _mm256_set1_pd(1.0 / 720.0));
  const __m256d q4 = _mm256_fmadd_pd(r, _mm256_set1_pd(1.0 / 362880.0), _mm256_set1_pd(1.0 / 40320.0));
  const __m256d q5 =
      _mm256_fmadd_pd(r, _mm256_set1_pd(1.0 / 39916800.0), _mm256_set1_pd(1.0 / 3628800.0));
  const __m256d q6 =
      _mm256_fmadd_pd(r, _mm256_set1_pd(1.0 / 6227020800.0), _mm256_set1_pd(1.0 / 479001600.0));
  const __m256d s0 = _mm256_fmadd_pd(r2, q1, q0);
  const __m256d s1 = _mm256_fmadd_pd(r2, q3, q2);
  const __m256d s2 = _mm256_fmadd_pd(r2, q5, q4);
  const __m256d t0 = _mm256_fmadd_pd(r4, s1, s0);
  const __m256d t1 = _mm256_fmadd_pd(r4, q6, s2);
  const __m256d p = _mm256_fmadd_pd(r8, t1, t0);

  const __m256i bits =
      _mm256_slli_epi64(_mm256_add_epi64(_mm256_castpd_si256(big), _mm256_set1_epi64x(1023)), 52);
  const __m256d res = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, res);
}

DSFLOW_AVX2 void sq_dist_row(const double* x, const double* yt, std::size_t m, std::size_t d,
                             double* out) {
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < d; ++k) {
      const __m256d diff =
          _mm256_sub_pd(_mm256_set1_pd(x[k]), _mm256_loadu_pd(yt + k * m + j));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + j, acc);
  }
  for (; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = x[k] - yt[k * m + j];
      acc = acc + diff * diff;
    }
    out[j] = acc;
  }
}

// Second pass shared by both log-sum-exp kernels: v holds the exponents.
DSFLOW_AVX2 double finish_lse(const double* v, std::size_t m, double vmax) {
  if (vmax == -std::numeric_limits<double>::infinity()) return vmax;
  const __m256d vm = _mm256_set1_pd(vmax);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 8 <= m; j += 8) {
    acc0 = _mm256_add_pd(acc0, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(v + j), vm)));
    acc1 = _mm256_add_pd(acc1, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(v + j + 4), vm)));
  }
  __m256d acc = _mm256_add_pd(acc0, acc1);
  for (; j + 4 <= m; j += 4) {
    acc = _mm256_add_pd(acc, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(v + j), vm)));
  }
  double sum = hsum(acc);
  for (; j < m; ++j) sum += std::exp(v[j] - vmax);
  return vmax + std::log(sum);
}

DSFLOW_AVX2 double log_sum_exp_row(const double* c, const double* h, double inv_eps,
                                   std::size_t m, double* scratch) {
  const __m256d ie = _mm256_set1_pd(inv_eps);
  __m256d vmax4 = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    const __m256d v =
        _mm256_sub_pd(_mm256_loadu_pd(h + j), _mm256_mul_pd(_mm256_loadu_pd(c + j), ie));
    _mm256_storeu_pd(scratch + j, v);
    vmax4 = _mm256_max_pd(vmax4, v);
  }
  double vmax = hmax(vmax4);
  for (; j < m; ++j) {
    const double v = h[j] - c[j] * inv_eps;
    scratch[j] = v;
    if (v > vmax) vmax = v;
  }
  return finish_lse(scratch, m, vmax);
}

DSFLOW_AVX2 double log_sum_exp_sqdist_row(const double* x, const double* yt, const double* h,
                                          double inv_eps, std::size_t m, std::size_t d,
                                          double* scratch) {
  sq_dist_row(x, yt, m, d, scratch);
  return log_sum_exp_row(scratch, h, inv_eps, m, scratch);
}

DSFLOW_AVX2 double exp_row(const double* c, const double* h, double base, double inv_eps,
                           std::size_t m, double* out) {
  const __m256d ie = _mm256_set1_pd(inv_eps);
  const __m256d b = _mm256_set1_pd(base);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    const __m256d arg = _mm256_sub_pd(_mm256_add_pd(b, _mm256_loadu_pd(h + j)),
                                      _mm256_mul_pd(_mm256_loadu_pd(c + j), ie));
    const __m256d e = exp_pd(arg);
    _mm256_storeu_pd(out + j, e);
    acc = _mm256_add_pd(acc, e);
  }
  double sum = hsum(acc);
  for (; j < m; ++j) {
    out[j] = std::exp(base + h[j] - c[j] * inv_eps);
    sum += out[j];
  }
  return sum;
}

DSFLOW_AVX2 double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

DSFLOW_AVX2 void sgd(double* x, const double* g, double step, std::size_t n) {
  const __m256d s = _mm256_set1_pd(step);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d upd = _mm256_mul_pd(s, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(x + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), upd));
  }
  for (; i < n; ++i) x[i] = x[i] - step * g[i];
}

DSFLOW_AVX2 void momentum(double* x, double* buf, const double* g, double step, double beta,
                          std::size_t n) {
  const __m256d s = _mm256_set1_pd(step);
  const __m256d bt = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d nb =
        _mm256_add_pd(_mm256_mul_pd(bt, _mm256_loadu_pd(buf + i)), _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(buf + i, nb);
    _mm256_storeu_pd(x + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(s, nb)));
  }
  for (; i < n; ++i) {
    buf[i] = beta * buf[i] + g[i];
    x[i] = x[i] - step * buf[i];
  }
}

DSFLOW_AVX2 void adam(double* x, double* m, double* v, const double* g, const AdamStep& p,
                      std::size_t n) {
  const __m256d b1 = _mm256_set1_pd(p.beta1);
  const __m256d b2 = _mm256_set1_pd(p.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - p.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - p.beta2);
  const __m256d bc1 = _mm256_set1_pd(p.bias1);
  const __m256d bc2 = _mm256_set1_pd(p.bias2);
  const __m256d lr = _mm256_set1_pd(p.step_size);
  const __m256d eps = _mm256_set1_pd(p.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi =
        _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, gi));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(omb2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, bc1);
    const __m256d vhat = _mm256_div_pd(vi, bc2);
    const __m256d upd =
        _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
    _mm256_storeu_pd(x + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g[i];
    v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * (g[i] * g[i]);
    const double mhat = m[i] / p.bias1;
    const double vhat = v[i] / p.bias2;
    x[i] = x[i] - p.step_size * mhat / (std::sqrt(vhat) + p.eps);
  }
}

DSFLOW_AVX2 void adagrad(double* x, double* acc, const double* g, double step, double eps,
                         std::size_t n) {
  const __m256d s = _mm256_set1_pd(step);
  const __m256d e = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d ai = _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(gi, gi));
    _mm256_storeu_pd(acc + i, ai);
    const __m256d upd = _mm256_div_pd(_mm256_mul_pd(s, gi), _mm256_add_pd(_mm256_sqrt_pd(ai), e));
    _mm256_storeu_pd(x + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), upd));
  }
  for (; i < n; ++i) {
    acc[i] = acc[i] + g[i] * g[i];
    x[i] = x[i] - step * g[i] / (std::sqrt(acc[i]) + eps);
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::avx2, sq_dist_row, log_sum_exp_row,
                                 log_sum_exp_sqdist_row, exp_row, dot,
                                 sgd, momentum, adam,
                                 adagrad};
  return &table;
}

}  // namespace dsflow::simd::detail

#else

namespace dsflow::simd::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace dsflow::simd::detail

#endif
