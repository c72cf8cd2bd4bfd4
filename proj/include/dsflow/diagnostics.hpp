#pragma once

// Numerical checks of geodesic convexity and flow contraction on small
// instances, and a nearest-centroid accuracy score for flowed datasets.

#include <cstddef>
#include <string>
#include <vector>

#include "dsflow/dynamics.hpp"

namespace dsflow {

// Feature-space W2 geodesic between two equal-size uniform datasets: particle
// i moves along a straight line to its partner under the exact squared
// Euclidean matching. Labels come from `a`. Requires n <= kExactOtMaxSize.
DatasetState displacement_interpolant(const DatasetState& a, const DatasetState& b, double t);

// Generalized geodesic through `base`: a and b are both matched to the base
// and matched particles are interpolated.
DatasetState generalized_interpolant(const DatasetState& base, const DatasetState& a,
                                     const DatasetState& b, double t);

// Squared W2 between the feature clouds of two datasets, exact.
double feature_w2_sq(const DatasetState& a, const DatasetState& b);

struct ConvexitySample {
  double t = 0.0;
  double lhs = 0.0;  // F(rho_t)
  double rhs = 0.0;  // (1-t) F(rho_0) + t F(rho_1) - lambda/2 t (1-t) W^2
};

struct ConvexityReport {
  std::string functional;
  double lambda_claimed = 0.0;
  double w2_sq = 0.0;  // W^2 in the inequality (generalized when a base is given)
  std::vector<ConvexitySample> samples;  // t = 0, 0.1, ..., 1
  double max_violation = 0.0;            // max(0, lhs - rhs)
};

// Evaluates the lambda-convexity inequality on 11 points of the geodesic from
// a to b, or of the generalized geodesic with base point `base` when given.
ConvexityReport check_displacement_convexity(const FunctionalSpec& functional,
                                             const DatasetState& a, const DatasetState& b,
                                             double lambda_claimed,
                                             const DatasetState* base = nullptr);

struct ContractionSample {
  std::size_t step = 0;
  double time = 0.0;   // step * step_size
  double delta = 0.0;  // W2^2 / 2 between the two flows
  double bound = 0.0;  // delta(0) exp(-2 lambda time)
};

struct ContractionReport {
  double lambda = 0.0;
  std::vector<ContractionSample> samples;
  double max_bound_ratio = 0.0;  // max delta / bound over samples with bound > 0
  bool monotone = true;          // delta(k+1) <= 1.05 delta(k) for every k
};

// Runs the flow from a and from b and compares the snapshots pairwise.
ContractionReport check_flow_contraction(const DatasetState& a, const DatasetState& b,
                                         const FlowConfig& config, double lambda);

// Nearest-class-centroid classifier fit on `source_train`, scored on the
// flowed particles. When both datasets have the same number of classes the
// label correspondence is the best one-to-one matching; otherwise each flowed
// class is scored by its majority prediction (purity).
double oracle_accuracy_proxy(const DatasetState& flowed, const DatasetState& source_train);

}  // namespace dsflow
