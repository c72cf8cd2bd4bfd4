#pragma once

// Data-parallel inner loops used by the transport solvers and the optimizers.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The active table is chosen once at first use from CPUID; setting
// DSFLOW_SIMD=scalar in the environment forces the reference kernels.
//
// Elementwise kernels (sq_dist_row, the optimizer updates) perform the same
// IEEE operations in the same order in both variants and agree bit for bit.
// Kernels containing exp() or a reduction agree to a relative tolerance only.

#include <cstddef>
#include <string_view>

namespace dsflow::simd {

enum class Isa { scalar, avx2 };

struct AdamStep {
  double step_size;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;

  // out[j] = sum_k (x[k] - yt[k*m + j])^2, with yt the d x m feature-major
  // transpose of the target cloud.
  void (*sq_dist_row)(const double* x, const double* yt, std::size_t m, std::size_t d,
                      double* out);

  // log sum_j exp(h[j] - c[j] * inv_eps). scratch holds m doubles.
  // Returns -inf when every term is -inf.
  double (*log_sum_exp_row)(const double* c, const double* h, double inv_eps, std::size_t m,
                            double* scratch);

  // Same reduction with c[j] = ||x - y_j||^2 evaluated on the fly.
  double (*log_sum_exp_sqdist_row)(const double* x, const double* yt, const double* h,
                                   double inv_eps, std::size_t m, std::size_t d,
                                   double* scratch);

  // out[j] = exp(base + h[j] - c[j] * inv_eps); returns sum_j out[j].
  double (*exp_row)(const double* c, const double* h, double base, double inv_eps,
                    std::size_t m, double* out);

  double (*dot)(const double* a, const double* b, std::size_t n);

  // x -= step * g
  void (*sgd)(double* x, const double* g, double step, std::size_t n);
  // buf = beta * buf + g; x -= step * buf
  void (*momentum)(double* x, double* buf, const double* g, double step, double beta,
                   std::size_t n);
  void (*adam)(double* x, double* m, double* v, const double* g, const AdamStep& p,
               std::size_t n);
  // acc += g^2; x -= step * g / (sqrt(acc) + eps)
  void (*adagrad)(double* x, double* acc, const double* g, double step, double eps,
                  std::size_t n);
};

const KernelTable& kernels();
const KernelTable& scalar_kernels();
// nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

std::string_view isa_name(Isa isa);

}  // namespace dsflow::simd
