#include "dsflow/gradients.hpp"

#include "dsflow/error.hpp"

namespace dsflow {

FlowGradients FlowGradients::zeros(const DatasetState& state, DynamicsMode mode) {
  FlowGradients g;
  const Eigen::Index d = state.dim();
  g.d_features = RowMatrix::Zero(state.size(), d);
  std::size_t blocks = 0;
  if (mode == DynamicsMode::jd_fl) blocks = state.class_dists.size();
  if (mode == DynamicsMode::jd_vl) blocks = state.particle_dists.size();
  g.d_means.assign(blocks, Vector::Zero(d));
  g.d_covs.assign(blocks, Matrix::Zero(d, d));
  return g;
}

bool FlowGradients::same_shape(const FlowGradients& o) const {
  if (d_features.rows() != o.d_features.rows() || d_features.cols() != o.d_features.cols()) {
    return false;
  }
  if (d_means.size() != o.d_means.size() || d_covs.size() != o.d_covs.size()) return false;
  for (std::size_t k = 0; k < d_means.size(); ++k) {
    if (d_means[k].size() != o.d_means[k].size()) return false;
  }
  for (std::size_t k = 0; k < d_covs.size(); ++k) {
    if (d_covs[k].rows() != o.d_covs[k].rows() || d_covs[k].cols() != o.d_covs[k].cols()) {
      return false;
    }
  }
  return true;
}

void FlowGradients::axpy(double w, const FlowGradients& o) {
  if (!same_shape(o)) throw DimensionError("FlowGradients: block shapes differ");
  d_features += w * o.d_features;
  for (std::size_t k = 0; k < d_means.size(); ++k) d_means[k] += w * o.d_means[k];
  for (std::size_t k = 0; k < d_covs.size(); ++k) d_covs[k] += w * o.d_covs[k];
}

bool FlowGradients::all_finite() const {
  if (!d_features.allFinite()) return false;
  for (const auto& m : d_means) {
    if (!m.allFinite()) return false;
  }
  for (const auto& c : d_covs) {
    if (!c.allFinite()) return false;
  }
  return true;
}

}  // namespace dsflow
