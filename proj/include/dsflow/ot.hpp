#pragma once

// Discrete optimal transport: entropic (log-domain Sinkhorn) and exact solvers,
// the debiased Sinkhorn divergence and envelope gradients of transport values.

#include <cstddef>
#include <functional>

#include "dsflow/types.hpp"

namespace dsflow {

struct TransportPlan {
  RowMatrix plan;      // n x m coupling; empty for the matrix-free point solvers
  Vector dual_left;    // phi
  Vector dual_right;   // psi
  double cost = 0.0;   // <plan, C>
  // Dual value <a, phi> + <b, psi>. Equals `cost` for exact plans and the
  // entropic objective <plan, C> + reg * KL(plan | a x b) for Sinkhorn plans.
  double objective = 0.0;
  double reg = 0.0;
  std::size_t iterations = 0;
  double violation = 0.0;  // L1 marginal violation of the returned plan
};

struct SinkhornOptions {
  std::size_t max_iter = 2000;
  double tol = 1e-6;
  // Start from these potentials instead of zero: psi for sinkhorn(), phi for
  // the symmetric solver. Ignored when the size does not match. A warm start
  // that has not converged within max_iter / 4 iterations is abandoned for a
  // cold solve.
  Vector warm_start;
  // Solve a decreasing sequence of regularizations ending at the requested one.
  // Skipped for a warm start.
  bool epsilon_scaling = true;
};

// Rows of `cost` index source points. Throws ConvergenceError when the L1
// marginal violation is still above tol after max_iter iterations.
TransportPlan sinkhorn(const RowMatrix& cost, const Vector& a, const Vector& b, double reg,
                       const SinkhornOptions& opts = {});

// Entropic transport of a measure onto itself (cost symmetric). The solver
// keeps phi == psi, so the plan is exactly symmetric.
TransportPlan sinkhorn_symmetric(const RowMatrix& cost, const Vector& a, double reg,
                                 const SinkhornOptions& opts = {});

struct SinkhornDivergence {
  double value = 0.0;  // OT(a,b) - OT(a,a)/2 - OT(b,b)/2 on dual values
  TransportPlan cross;
  TransportPlan self_left;
  TransportPlan self_right;
};

SinkhornDivergence sinkhorn_divergence(const RowMatrix& cost_xy, const RowMatrix& cost_xx,
                                       const RowMatrix& cost_yy, const Vector& a, const Vector& b,
                                       double reg, const SinkhornOptions& opts = {});

// Matrix-free variants for squared Euclidean cost between point clouds (one
// point per row). Memory is O(n + m); the returned plans have empty `plan`.
TransportPlan sinkhorn_points(const RowMatrix& x, const RowMatrix& y, const Vector& a,
                              const Vector& b, double reg, const SinkhornOptions& opts = {});
TransportPlan sinkhorn_points_symmetric(const RowMatrix& x, const Vector& a, double reg,
                                        const SinkhornOptions& opts = {});
double sinkhorn_divergence_points(const RowMatrix& x, const RowMatrix& y, const Vector& a,
                                  const Vector& b, double reg, const SinkhornOptions& opts = {});

// Exact solver for n, m <= kExactOtMaxSize. Uniform equal-size marginals are
// solved as an assignment problem, anything else by the transportation simplex.
inline constexpr std::size_t kExactOtMaxSize = 64;
TransportPlan exact_ot(const RowMatrix& cost, const Vector& a, const Vector& b);

// Writes grad_x c(x, y) into out (length d).
using GroundGrad = std::function<void(const double* x, const double* y, std::size_t d, double* out)>;

// Envelope gradient sum_j plan_ij grad_x c(x_i, y_j), one row per source point.
RowMatrix ot_position_grad(const TransportPlan& plan, const RowMatrix& source,
                           const RowMatrix& target, const GroundGrad& ground_grad);
// Same for c = ||x - y||^2.
RowMatrix ot_position_grad(const TransportPlan& plan, const RowMatrix& source,
                           const RowMatrix& target);

// Gradient of the divergence with respect to the source points, squared
// Euclidean cost: cross term minus the self-term envelope.
RowMatrix sinkhorn_divergence_position_grad(const SinkhornDivergence& div, const RowMatrix& x,
                                            const RowMatrix& y);

RowMatrix sq_euclidean_cost(const RowMatrix& x, const RowMatrix& y);
double mean_cost(const RowMatrix& cost);
// Checks weights are finite, nonnegative and sum to one within 1e-9.
void validate_weights(const Vector& w, const char* what);
Vector uniform_weights(Eigen::Index n);

}  // namespace dsflow
