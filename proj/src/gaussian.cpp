#include "dsflow/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "dsflow/error.hpp"

namespace dsflow {
namespace {

void require_finite_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": matrix is not square");
  }
  if (!m.allFinite()) throw NumericInputError(std::string(what) + ": non-finite entries");
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Square root of a symmetric PSD 2x2 matrix by Cayley-Hamilton:
// sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)).
Matrix sqrt_2x2(const Matrix& m) {
  const double s = std::sqrt(std::max(0.0, m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)));
  const double t2 = m.trace() + 2.0 * s;
  if (!(t2 > 0.0)) return Matrix::Zero(2, 2);
  const double inv_t = 1.0 / std::sqrt(t2);
  Matrix r(2, 2);
  r(0, 0) = (m(0, 0) + s) * inv_t;
  r(1, 1) = (m(1, 1) + s) * inv_t;
  r(0, 1) = r(1, 0) = 0.5 * (m(0, 1) + m(1, 0)) * inv_t;
  return r;
}

double trace_sqrt_2x2(const Matrix& m) {
  const double s = std::sqrt(std::max(0.0, m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)));
  return std::sqrt(std::max(0.0, m.trace() + 2.0 * s));
}

Matrix sqrt_psd_unchecked(const Matrix& m) {
  const Eigen::Index d = m.rows();
  if (d == 1) return Matrix::Constant(1, 1, std::sqrt(std::max(0.0, m(0, 0))));
  if (d == 2) return sqrt_2x2(m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw NumericInputError("spd_sqrt: eigendecomposition failed");
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return symmetrized(es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose());
}

double trace_sqrt_psd(const Matrix& m) {
  const Eigen::Index d = m.rows();
  if (d == 1) return std::sqrt(std::max(0.0, m(0, 0)));
  if (d == 2) return trace_sqrt_2x2(m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericInputError("bures: eigendecomposition failed");
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

void check_pair(const LabelDistribution& a, const LabelDistribution& b) {
  if (a.mean.size() != a.cov.rows() || b.mean.size() != b.cov.rows()) {
    throw DimensionError("bures: mean and covariance dimensions disagree");
  }
  if (a.mean.size() != b.mean.size()) throw DimensionError("bures: dimension mismatch");
}

}  // namespace

double psd_floor(const Matrix& cov) {
  const double d = static_cast<double>(std::max<Eigen::Index>(cov.rows(), 1));
  return std::max(kRelativePsdFloor * cov.trace() / d, kAbsolutePsdFloor);
}

Matrix spd_sqrt(const Matrix& m) {
  require_finite_square(m, "spd_sqrt");
  return sqrt_psd_unchecked(symmetrized(m));
}

Matrix project_psd(const Matrix& m, double floor) {
  require_finite_square(m, "project_psd");
  if (!std::isfinite(floor)) throw NumericInputError("project_psd: non-finite floor");
  const Matrix sym = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw NumericInputError("project_psd: eigendecomposition failed");
  if (es.eigenvalues().minCoeff() >= floor) return m;
  const Vector clipped = es.eigenvalues().cwiseMax(floor);
  return symmetrized(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose());
}

BuresAnchor::BuresAnchor(const LabelDistribution& a) : a_(a), trace_a_(a.cov.trace()) {
  if (a.mean.size() != a.cov.rows()) {
    throw DimensionError("bures: mean and covariance dimensions disagree");
  }
  require_finite_square(a.cov, "bures");
  if (!a.mean.allFinite()) throw NumericInputError("bures: non-finite mean");
  const Matrix sym = symmetrized(a.cov);
  const Eigen::Index d = sym.rows();
  if (d <= 2) {
    sqrt_a_ = sqrt_psd_unchecked(sym);
    const double det = d == 1 ? sqrt_a_(0, 0) : sqrt_a_.determinant();
    const double scale = d == 1 ? sqrt_a_(0, 0) : sqrt_a_.trace();
    if (det > 1e-14 * scale * scale && scale > 0.0) {
      if (d == 1) {
        inv_sqrt_a_ = Matrix::Constant(1, 1, 1.0 / sqrt_a_(0, 0));
      } else {
        inv_sqrt_a_.resize(2, 2);
        inv_sqrt_a_(0, 0) = sqrt_a_(1, 1) / det;
        inv_sqrt_a_(1, 1) = sqrt_a_(0, 0) / det;
        inv_sqrt_a_(0, 1) = inv_sqrt_a_(1, 0) = -sqrt_a_(0, 1) / det;
      }
    }
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw NumericInputError("bures: eigendecomposition failed");
  const Vector ev = es.eigenvalues().cwiseMax(0.0);
  const Matrix& v = es.eigenvectors();
  sqrt_a_ = symmetrized(v * ev.cwiseSqrt().asDiagonal() * v.transpose());
  if (ev.minCoeff() > 1e-14 * ev.maxCoeff() && ev.maxCoeff() > 0.0) {
    inv_sqrt_a_ = symmetrized(v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose());
  }
}

Matrix BuresAnchor::trace_root_arg(const Matrix& b_cov) const {
  return symmetrized(sqrt_a_ * b_cov * sqrt_a_);
}

double BuresAnchor::w2_sq(const LabelDistribution& b) const {
  check_pair(a_, b);
  if (a_ == b) return 0.0;
  const double mean_term = (a_.mean - b.mean).squaredNorm();
  const double cross = trace_sqrt_psd(trace_root_arg(b.cov));
  const double value = mean_term + trace_a_ + b.cov.trace() - 2.0 * cross;
  if (!std::isfinite(value)) throw NumericInputError("bures: non-finite distance");
  return std::max(0.0, value);
}

BuresGradient BuresAnchor::grad(const LabelDistribution& b) const {
  check_pair(a_, b);
  const Eigen::Index d = a_.mean.size();
  BuresGradient g{2.0 * (a_.mean - b.mean), Matrix::Zero(d, d)};
  if (a_ == b) return g;
  if (inv_sqrt_a_.size() == 0) {
    throw ConditioningError("bures_w2_sq_grad: covariance of the first argument is singular");
  }
  const Matrix root = sqrt_psd_unchecked(trace_root_arg(b.cov));
  const Matrix t = symmetrized(inv_sqrt_a_ * root * inv_sqrt_a_);
  g.cov = Matrix::Identity(d, d) - t;
  return g;
}

double bures_w2_sq(const LabelDistribution& a, const LabelDistribution& b) {
  check_pair(a, b);
  if (a == b) return 0.0;
  return BuresAnchor(a).w2_sq(b);
}

BuresGradient bures_w2_sq_grad(const LabelDistribution& a, const LabelDistribution& b) {
  return BuresAnchor(a).grad(b);
}

}  // namespace dsflow
