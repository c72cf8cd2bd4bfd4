#pragma once

#include <Eigen/Core>

namespace dsflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Point clouds (one row per point) and cost matrices are stored row-major so a
// row is a contiguous span for the SIMD kernels.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace dsflow
