#pragma once

#include <vector>

#include "dsflow/dataset.hpp"

namespace dsflow {

// Gradients of a functional with respect to the movable parts of a state, per
// unit of particle (or class) mass: the feature row for particle i is the
// gradient of the first variation evaluated at x_i, so an Euler step
// x_i -= tau * d_features.row(i) discretizes the flow independently of n.
//
// d_means / d_covs are empty in fd mode, hold one block per class (ascending
// class id, the order of DatasetState::class_dists) in jd-fl mode, and one
// block per particle in jd-vl mode.
struct FlowGradients {
  RowMatrix d_features;
  std::vector<Vector> d_means;
  std::vector<Matrix> d_covs;

  static FlowGradients zeros(const DatasetState& state, DynamicsMode mode);
  // this += w * other; shapes must match.
  void axpy(double w, const FlowGradients& other);
  bool all_finite() const;
  bool same_shape(const FlowGradients& other) const;
};

}  // namespace dsflow
