#pragma once

// Labeled particle systems: the discrete measure sum_i p_i delta_(x_i, y_i)
// together with Gaussian summaries of the label classes.

#include <map>
#include <string_view>
#include <vector>

#include "dsflow/gaussian.hpp"
#include "dsflow/types.hpp"

namespace dsflow {

enum class DynamicsMode {
  fd,     // features move; class statistics are recomputed after each step
  jd_fl,  // features and per-class (mu, Sigma) move; labels fixed
  jd_vl,  // features and per-particle (mu, Sigma) move; labels re-clustered
};

std::string_view mode_name(DynamicsMode mode);
// Accepts "fd", "jd-fl", "jd-vl". Throws ConfigError otherwise.
DynamicsMode parse_mode(std::string_view name);

struct Particle {
  Vector features;
  int label = 0;
};

struct DatasetState {
  RowMatrix features;       // n x d, one particle per row
  std::vector<int> labels;  // length n, nonnegative class ids
  Vector weights;           // length n, sums to one
  std::map<int, LabelDistribution> class_dists;
  // Per-particle distributions, present only in jd-vl dynamics.
  std::vector<LabelDistribution> particle_dists;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool per_particle() const { return !particle_dists.empty(); }
  Particle particle(Eigen::Index i) const;
  // Distribution attached to particle i: its own in jd-vl, its class's otherwise.
  const LabelDistribution& label_dist(Eigen::Index i) const;
  std::vector<int> class_ids() const;
};

// Uniform weights, class statistics from the data.
DatasetState make_state(RowMatrix features, std::vector<int> labels);

// Per-class weighted mean and biased covariance (weights renormalized within
// the class), eigenvalues floored at psd_floor. Classes listed in class_dists
// that have no particles raise DegenerateClassError.
std::map<int, LabelDistribution> label_stats(const DatasetState& state);
void refresh_label_stats(DatasetState& state);

// Gives every particle its own copy of its class distribution.
void decouple(DatasetState& state);

// Shape and finiteness checks; `mode` decides which label representation is required.
void validate_state(const DatasetState& state, DynamicsMode mode);

}  // namespace dsflow
