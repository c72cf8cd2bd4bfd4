#pragma once

// Symmetric positive semidefinite matrix primitives and the closed-form
// 2-Wasserstein (Bures) geometry of Gaussian distributions.

#include "dsflow/types.hpp"

namespace dsflow {

// Gaussian N(mean, cov) summarizing the features of one class.
struct LabelDistribution {
  Vector mean;
  Matrix cov;

  Eigen::Index dim() const { return mean.size(); }
  bool operator==(const LabelDistribution& o) const {
    return mean.size() == o.mean.size() && cov.rows() == o.cov.rows() && mean == o.mean &&
           cov == o.cov;
  }
};

// Smallest eigenvalue kept in any covariance: 1e-6 * trace(cov) / d, and never
// below kAbsolutePsdFloor so that zero-variance classes stay invertible.
inline constexpr double kRelativePsdFloor = 1e-6;
inline constexpr double kAbsolutePsdFloor = 1e-9;
double psd_floor(const Matrix& cov);

Matrix spd_sqrt(const Matrix& m);

// Clips the eigenvalues of a symmetric matrix below at `floor`. Matrices that
// already satisfy the floor are returned unchanged.
Matrix project_psd(const Matrix& m, double floor);

// Squared Bures-Wasserstein distance
//   ||mu_a - mu_b||^2 + tr A + tr B - 2 tr (A^1/2 B A^1/2)^1/2.
double bures_w2_sq(const LabelDistribution& a, const LabelDistribution& b);

struct BuresGradient {
  Vector mean;  // 2 (mu_a - mu_b)
  Matrix cov;   // I - T, T the optimal linear map from N(a) to N(b)
};

// Gradient of bures_w2_sq with respect to the first argument.
// Throws ConditioningError when cov_a is numerically singular.
BuresGradient bures_w2_sq_grad(const LabelDistribution& a, const LabelDistribution& b);

// Caches the square root factors of one distribution so repeated distances and
// gradients against many partners skip the per-call eigendecomposition of A.
class BuresAnchor {
 public:
  explicit BuresAnchor(const LabelDistribution& a);

  double w2_sq(const LabelDistribution& b) const;
  BuresGradient grad(const LabelDistribution& b) const;
  const LabelDistribution& dist() const { return a_; }

 private:
  Matrix trace_root_arg(const Matrix& b_cov) const;

  LabelDistribution a_;
  Matrix sqrt_a_;
  Matrix inv_sqrt_a_;  // empty when A is numerically singular
  double trace_a_;
};

}  // namespace dsflow
