#include <cmath>
#include <limits>

#include "kernels_impl.hpp"

namespace dsflow::simd::detail {
namespace {

void sq_dist_row(const double* x, const double* yt, std::size_t m, std::size_t d, double* out) {
  for (std::size_t j = 0; j < m; ++j) out[j] = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double xk = x[k];
    const double* row = yt + k * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double diff = xk - row[j];
      out[j] = out[j] + diff * diff;
    }
  }
}

double finish_lse(const double* v, std::size_t m, double vmax) {
  if (vmax == -std::numeric_limits<double>::infinity()) return vmax;
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) sum += std::exp(v[j] - vmax);
  return vmax + std::log(sum);
}

double log_sum_exp_row(const double* c, const double* h, double inv_eps, std::size_t m,
                       double* scratch) {
  double vmax = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    const double v = h[j] - c[j] * inv_eps;
    scratch[j] = v;
    if (v > vmax) vmax = v;
  }
  return finish_lse(scratch, m, vmax);
}

double log_sum_exp_sqdist_row(const double* x, const double* yt, const double* h, double inv_eps,
                              std::size_t m, std::size_t d, double* scratch) {
  sq_dist_row(x, yt, m, d, scratch);
  double vmax = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    const double v = h[j] - scratch[j] * inv_eps;
    scratch[j] = v;
    if (v > vmax) vmax = v;
  }
  return finish_lse(scratch, m, vmax);
}

double exp_row(const double* c, const double* h, double base, double inv_eps, std::size_t m,
               double* out) {
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    out[j] = std::exp(base + h[j] - c[j] * inv_eps);
    sum += out[j];
  }
  return sum;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void sgd(double* x, const double* g, double step, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] - step * g[i];
}

void momentum(double* x, double* buf, const double* g, double step, double beta, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    buf[i] = beta * buf[i] + g[i];
    x[i] = x[i] - step * buf[i];
  }
}

void adam(double* x, double* m, double* v, const double* g, const AdamStep& p, std::size_t n) {
  const double one_minus_b1 = 1.0 - p.beta1;
  const double one_minus_b2 = 1.0 - p.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = p.beta1 * m[i] + one_minus_b1 * g[i];
    v[i] = p.beta2 * v[i] + one_minus_b2 * (g[i] * g[i]);
    const double mhat = m[i] / p.bias1;
    const double vhat = v[i] / p.bias2;
    x[i] = x[i] - p.step_size * mhat / (std::sqrt(vhat) + p.eps);
  }
}

void adagrad(double* x, double* acc, const double* g, double step, double eps, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    acc[i] = acc[i] + g[i] * g[i];
    x[i] = x[i] - step * g[i] / (std::sqrt(acc[i]) + eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar,   sq_dist_row, log_sum_exp_row,
                                 log_sum_exp_sqdist_row, exp_row, dot,
                                 sgd,           momentum,    adam,
                                 adagrad};
  return table;
}

}  // namespace dsflow::simd::detail
