#pragma once

// Optimal transport dataset distance. The ground cost between labeled points
// is ||x - x'||^2 + W2^2(v_y, v'_y') with v the Gaussian label distributions;
// the distance is the square root of the (by default debiased) entropic
// transport value under this cost.

#include "dsflow/dataset.hpp"
#include "dsflow/gradients.hpp"
#include "dsflow/ot.hpp"

namespace dsflow {

// Regularization used when none is given, relative to the mean ground cost.
inline constexpr double kDefaultRegFactor = 0.05;

struct OtddOptions {
  double reg = 0.0;  // <= 0 selects kDefaultRegFactor * mean ground cost
  bool debiased = true;
  SinkhornOptions sinkhorn;
};

struct OtddResult {
  double value = 0.0;       // sqrt(max(divergence, 0))
  double divergence = 0.0;  // entropic transport value, debiased when requested
  double reg = 0.0;
  bool debiased = true;
  TransportPlan cross;
  TransportPlan self_src;  // empty plans when not debiased
  TransportPlan self_dst;
};

// Reuses Sinkhorn potentials between calls along a flow, and the target
// self-transport term, which only depends on the fixed target and reg.
// A workspace must only be used with one target dataset.
struct OtddWorkspace {
  Vector cross_potential;
  Vector self_potential;
  bool has_target_self = false;
  double target_reg = 0.0;
  TransportPlan target_self;
};

// Squared Bures distances between the label distributions of src particles
// (per class, or per particle in jd-vl) and dst classes.
RowMatrix ground_cost_matrix(const DatasetState& src, const DatasetState& dst);
double default_reg(const DatasetState& src, const DatasetState& dst);

OtddResult otdd(const DatasetState& src, const DatasetState& dst, const OtddOptions& opts = {},
                OtddWorkspace* workspace = nullptr);

// Gradients of result.divergence with respect to the source state, per unit
// mass (see FlowGradients). In fd mode the class statistics are treated as
// constants, so only feature gradients are produced.
FlowGradients otdd_grads(const DatasetState& src, const DatasetState& dst,
                         const OtddResult& result, DynamicsMode mode);

}  // namespace dsflow
