#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "dsflow/error.hpp"
#include "dsflow/ot.hpp"
#include "dsflow/simd/kernels.hpp"

namespace dsflow {
namespace {

constexpr double kMaxRelaxation = 1.9;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Intermediate stages of epsilon scaling only need rough potentials.
constexpr double kStageTol = 1e-3;
constexpr std::size_t kStageMaxIter = 200;
constexpr double kScalingFactor = 0.5;

// Iterations of the final stage before a stalled solve tries Newton steps, and
// the largest problems that get them.
constexpr std::size_t kNewtonAfter = 300;
constexpr Eigen::Index kNewtonMaxDim = 1000;
constexpr Eigen::Index kNewtonMaxEntries = 2000000;

Vector log_weights(const Vector& w) {
  Vector lw(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) lw[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
  return lw;
}

void check_reg(double reg) {
  if (!(reg > 0.0) || !std::isfinite(reg)) {
    throw NumericInputError("sinkhorn: regularization must be positive and finite");
  }
}

void check_cost(const RowMatrix& c, const Vector& a, const Vector& b) {
  if (c.rows() != a.size() || c.cols() != b.size()) {
    throw DimensionError("sinkhorn: cost matrix shape does not match the weights");
  }
  if (!c.allFinite()) throw NumericInputError("sinkhorn: non-finite cost entries");
}

RowMatrix transposed(const RowMatrix& m) { return m.transpose(); }

struct StageResult {
  std::size_t iterations = 0;
  double violation = std::numeric_limits<double>::infinity();
  bool converged = false;
};

// Alternating log-domain updates
//   f_i = -eps log sum_j b_j exp((g_j - C_ij) / eps), and symmetrically for g.
// row_f(i, h, inv_eps, scratch) must return log sum_j exp(h_j - C_ij inv_eps),
// row_g the same over a column.
//
// Plain Sinkhorn contracts slowly when the plan is close to a permutation.
// Once the observed contraction rate theta is known, the updates are
// over-relaxed, x <- (1 - w) x + w T(x) with w = 2 / (1 + sqrt(1 - theta)),
// which keeps the fixed point. A growing violation resets w to 1.
template <class RowF, class RowG>
StageResult alternating_stage(const Vector& a, const Vector& la, const Vector& lb, double eps,
                              double tol, std::size_t max_iter, RowF&& row_f, RowG&& row_g,
                              Vector& f, Vector& g) {
  const Eigen::Index n = la.size();
  const Eigen::Index m = lb.size();
  const double inv = 1.0 / eps;
  std::vector<double> scratch(static_cast<std::size_t>(std::max(n, m)));
  Vector ha(n);
  Vector hb = lb + g * inv;
  Vector tf(n);
  StageResult r;
  double omega = 1.0;
  bool relax_allowed = true;
  std::vector<double> history;
  double best = std::numeric_limits<double>::infinity();
  Vector best_g = g;

  auto update_g = [&](double w) {
    ha = la + f * inv;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double tg = -eps * row_g(j, ha.data(), inv, scratch.data());
      g[j] = w == 1.0 ? tg : (1.0 - w) * g[j] + w * tg;
    }
    hb = lb + g * inv;
  };
  for (std::size_t it = 0; it <= max_iter; ++it) {
    double viol = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      tf[i] = -eps * row_f(i, hb.data(), inv, scratch.data());
      if (a[i] > 0.0) viol += a[i] * std::abs(1.0 - std::exp((f[i] - tf[i]) * inv));
    }
    if (it > 0) {
      r.violation = viol;
      if (viol <= tol && omega != 1.0) {
        // Converged under relaxation: continue with plain steps.
        omega = 1.0;
        relax_allowed = false;
      } else if (viol <= tol) {
        f = tf;
        update_g(1.0);
        r.iterations = it;
        r.converged = true;
        return r;
      }
      if (!std::isfinite(viol) || (omega > 1.0 && viol > 100.0 * best)) {
        // Relaxation overshoots: restart plain iterations from the best column potential.
        omega = 1.0;
        relax_allowed = false;
        g = best_g;
        hb = lb + g * inv;
        for (Eigen::Index i = 0; i < n; ++i) tf[i] = -eps * row_f(i, hb.data(), inv, scratch.data());
      } else if (viol < best) {
        best = viol;
        best_g = g;
      }
      history.push_back(viol);
      constexpr std::size_t kWindow = 10;
      if (relax_allowed && history.size() >= 2 * kWindow && history.size() % kWindow == 0) {
        const double rho =
            std::pow(history.back() / history[history.size() - 1 - kWindow], 1.0 / kWindow);
        // Young's relation (rho + w - 1)^2 = rho w^2 theta recovers the plain rate.
        const double theta =
            omega == 1.0 ? rho : (rho + omega - 1.0) * (rho + omega - 1.0) / (rho * omega * omega);
        if (rho > 0.0 && rho < 1.0 && theta > 0.5 && theta < 1.0) {
          omega = std::max(omega, std::min(kMaxRelaxation, 2.0 / (1.0 + std::sqrt(1.0 - theta))));
        }
      }
    }
    if (it == max_iter) break;
    f = omega == 1.0 ? tf : Vector((1.0 - omega) * f + omega * tf);
    update_g(omega);
    r.iterations = it + 1;
  }
  return r;
}

// Newton steps on the dual
//   D(f, g) = <a, f> + <b, g> - eps sum_ij a_i b_j exp((f_i + g_j - C_ij) / eps).
// Nearly decoupled blocks of the plan leave a mode that plain updates shrink
// by a factor close to 1 per iteration; the Hessian resolves it in one step.
// The system is reduced to the Schur complement on the smaller side, whose
// null vector (constant shift) is removed by a rank-one term. Returns true
// once the L1 marginal error is below tol.
bool newton_polish(const RowMatrix& cost, const Vector& a, const Vector& b, double eps, double tol,
                   Vector& f, Vector& g) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  if (std::min(n, m) > kNewtonMaxDim || n * m > kNewtonMaxEntries) return false;
  if (a.minCoeff() <= 0.0 || b.minCoeff() <= 0.0) return false;
  if (m > n) return newton_polish(transposed(cost), b, a, eps, tol, g, f);
  const double inv = 1.0 / eps;
  const Vector la = a.array().log();
  const Vector lb = b.array().log();
  auto plan = [&](const Vector& ff, const Vector& gg) {
    Eigen::ArrayXXd e = (-inv * cost.array()).colwise() + (la + ff * inv).array();
    e.rowwise() += (lb + gg * inv).transpose().array();
    return RowMatrix(e.exp().matrix());
  };
  auto dual = [&](const Vector& ff, const Vector& gg, const RowMatrix& p) {
    return a.dot(ff) + b.dot(gg) - eps * p.sum();
  };
  RowMatrix p = plan(f, g);
  for (int it = 0; it < 50; ++it) {
    const Vector r = p.rowwise().sum();
    const Vector c = p.colwise().sum().transpose();
    const Vector ra = a - r;
    const Vector cb = b - c;
    const double err = ra.lpNorm<1>() + cb.lpNorm<1>();
    if (!std::isfinite(err) || r.minCoeff() <= 0.0) return false;
    if (err <= tol) return true;
    const RowMatrix pr = r.cwiseInverse().asDiagonal() * p;
    Matrix s = -p.transpose() * pr;
    s.diagonal() += c;
    s.array() += s.diagonal().mean() / static_cast<double>(m);
    const Vector dg = s.ldlt().solve(eps * (cb - pr.transpose() * ra));
    const Vector df = (eps * ra - p * dg).cwiseQuotient(r);
    if (!dg.allFinite() || !df.allFinite()) return false;
    const double d0 = dual(f, g, p);
    const double slope = ra.dot(df) + cb.dot(dg);
    bool moved = false;
    for (double t = 1.0; t > 1e-6; t *= 0.5) {
      const Vector ft = f + t * df;
      const Vector gt = g + t * dg;
      RowMatrix pt = plan(ft, gt);
      const double dt = dual(ft, gt, pt);
      if (!std::isfinite(dt)) continue;
      const double et = (a - pt.rowwise().sum()).lpNorm<1>() + (b - pt.colwise().sum().transpose()).lpNorm<1>();
      if (dt >= d0 + 1e-4 * t * slope || et < err) {
        f = ft;
        g = gt;
        p = std::move(pt);
        moved = true;
        break;
      }
    }
    if (!moved) return false;
  }
  return false;
}

// Symmetric fixed point f = (f + T f) / 2 with T the Sinkhorn map of the
// self-transport problem; row(i, h, inv_eps, scratch) as in alternating_stage.
template <class Row>
StageResult symmetric_stage(const Vector& a, const Vector& la, double eps, double tol,
                            std::size_t max_iter, Row&& row, Vector& f) {
  const Eigen::Index n = la.size();
  const double inv = 1.0 / eps;
  std::vector<double> scratch(static_cast<std::size_t>(n));
  Vector t(n);
  StageResult r;
  for (std::size_t it = 0; it <= max_iter; ++it) {
    const Vector h = la + f * inv;
    double viol = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      t[i] = -eps * row(i, h.data(), inv, scratch.data());
      if (a[i] > 0.0) viol += a[i] * std::abs(1.0 - std::exp((f[i] - t[i]) * inv));
    }
    r.iterations = it;
    r.violation = viol;
    if (viol <= tol) {
      r.converged = true;
      return r;
    }
    if (it == max_iter) break;
    f = 0.5 * (f + t);
  }
  return r;
}

std::vector<double> scaling_schedule(double reg, double scale, bool enabled) {
  std::vector<double> eps;
  if (enabled && scale > 8.0 * reg) {
    for (double e = scale; e > 2.0 * reg; e *= kScalingFactor) eps.push_back(e);
  }
  eps.push_back(reg);
  return eps;
}

// A warm start can leave a slowly contracting offset between weakly coupled
// blocks of the plan. It gets a quarter of the budget before a cold solve.
std::size_t warm_budget(std::size_t max_iter) { return std::max<std::size_t>(1, max_iter / 4); }

[[noreturn]] void fail(const char* who, const StageResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: no convergence after %zu iterations (marginal violation %.3g)",
                who, r.iterations, r.violation);
  throw ConvergenceError(buf, r.violation, r.iterations);
}

// polish(eps, tol, f, g) may move stalled potentials closer to the fixed
// point and returns false when it cannot help.
template <class RowF, class RowG, class Polish>
void solve_alternating(const char* who, const Vector& a, const Vector& b, double reg,
                       double scale, const SinkhornOptions& opts, RowF&& row_f, RowG&& row_g,
                       Polish&& polish, TransportPlan& out) {
  const Vector la = log_weights(a);
  const Vector lb = log_weights(b);
  Vector f, g;
  std::size_t total = 0;
  StageResult r;
  auto attempt = [&](bool warm, std::size_t budget) {
    f = Vector::Zero(a.size());
    g = warm ? opts.warm_start : Vector::Zero(b.size());
    const auto schedule = scaling_schedule(reg, scale, opts.epsilon_scaling && !warm);
    for (std::size_t s = 0; s + 1 < schedule.size(); ++s) {
      r = alternating_stage(a, la, lb, schedule[s], std::max(opts.tol, kStageTol), kStageMaxIter,
                            row_f, row_g, f, g);
      total += r.iterations;
    }
    const double eps = schedule.back();
    const std::size_t first = std::min(budget, kNewtonAfter);
    r = alternating_stage(a, la, lb, eps, opts.tol, first, row_f, row_g, f, g);
    total += r.iterations;
    if (r.converged || first == budget) return;
    Vector pf = f, pg = g;
    if (polish(eps, 0.1 * opts.tol, pf, pg)) {
      f = std::move(pf);
      g = std::move(pg);
    }
    r = alternating_stage(a, la, lb, eps, opts.tol, budget - first, row_f, row_g, f, g);
    total += r.iterations;
  };
  const bool warm = opts.warm_start.size() == b.size() && opts.warm_start.allFinite();
  if (warm) attempt(true, warm_budget(opts.max_iter));
  if (!warm || !r.converged) attempt(false, opts.max_iter);
  r.iterations = total;
  if (!r.converged) fail(who, r);
  out.dual_left = std::move(f);
  out.dual_right = std::move(g);
  out.iterations = total;
  out.violation = r.violation;
  out.reg = reg;
  out.objective = a.dot(out.dual_left) + b.dot(out.dual_right);
}

template <class Row>
void solve_symmetric(const char* who, const Vector& a, double reg, double scale,
                     const SinkhornOptions& opts, Row&& row, TransportPlan& out) {
  const Vector la = log_weights(a);
  Vector f;
  std::size_t total = 0;
  StageResult r;
  auto attempt = [&](bool warm, std::size_t budget) {
    f = warm ? opts.warm_start : Vector::Zero(a.size());
    const auto schedule = scaling_schedule(reg, scale, opts.epsilon_scaling && !warm);
    for (std::size_t s = 0; s < schedule.size(); ++s) {
      const bool last = s + 1 == schedule.size();
      r = symmetric_stage(a, la, schedule[s], last ? opts.tol : std::max(opts.tol, kStageTol),
                          last ? budget : kStageMaxIter, row, f);
      total += r.iterations;
    }
  };
  const bool warm = opts.warm_start.size() == a.size() && opts.warm_start.allFinite();
  if (warm) attempt(true, warm_budget(opts.max_iter));
  if (!warm || !r.converged) attempt(false, opts.max_iter);
  r.iterations = total;
  if (!r.converged) fail(who, r);
  out.dual_left = f;
  out.dual_right = std::move(f);
  out.iterations = total;
  out.violation = r.violation;
  out.reg = reg;
  out.objective = 2.0 * a.dot(out.dual_left);
}

// Materializes plan_ij = a_i b_j exp((f_i + g_j - C_ij) / reg) and its cost.
void build_plan(const RowMatrix& cost, const Vector& a, const Vector& b, TransportPlan& p) {
  const auto& k = simd::kernels();
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  const double inv = 1.0 / p.reg;
  const Vector la = log_weights(a);
  const Vector hb = log_weights(b) + p.dual_right * inv;
  p.plan.resize(n, m);
  Vector col = Vector::Zero(m);
  double row_viol = 0.0;
  double total_cost = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double* out = p.plan.row(i).data();
    if (a[i] > 0.0) {
      const double s = k.exp_row(cost.row(i).data(), hb.data(), la[i] + p.dual_left[i] * inv,
                                 inv, static_cast<std::size_t>(m), out);
      row_viol += std::abs(s - a[i]);
      total_cost += k.dot(out, cost.row(i).data(), static_cast<std::size_t>(m));
    } else {
      std::fill(out, out + m, 0.0);
    }
    col += p.plan.row(i).transpose();
  }
  p.cost = total_cost;
  p.violation = std::max(row_viol, (col - b).cwiseAbs().sum());
}

double bounding_sq_diameter(const RowMatrix& x, const RowMatrix& y) {
  if (x.rows() == 0 || y.rows() == 0) return 0.0;
  const Eigen::RowVectorXd lo = x.colwise().minCoeff().cwiseMin(y.colwise().minCoeff());
  const Eigen::RowVectorXd hi = x.colwise().maxCoeff().cwiseMax(y.colwise().maxCoeff());
  return (hi - lo).squaredNorm();
}

// Row oracles for the matrix-free solvers: cost row i is ||x_i - y_.||^2 with
// y stored feature-major.
struct SqDistRows {
  const RowMatrix* x;
  RowMatrix yt;
  double operator()(Eigen::Index i, const double* h, double inv, double* scratch) const {
    return simd::kernels().log_sum_exp_sqdist_row(x->row(i).data(), yt.data(), h, inv,
                                                  static_cast<std::size_t>(yt.cols()),
                                                  static_cast<std::size_t>(yt.rows()), scratch);
  }
};

void check_points(const RowMatrix& x, const Vector& a, const char* what) {
  if (x.rows() != a.size()) throw DimensionError(std::string(what) + ": point/weight count mismatch");
  if (!x.allFinite()) throw NumericInputError(std::string(what) + ": non-finite coordinates");
}

TransportPlan points_self(const RowMatrix& x, const Vector& a, double reg,
                          const SinkhornOptions& opts);

TransportPlan points_cross(const RowMatrix& x, const RowMatrix& y, const Vector& a,
                           const Vector& b, double reg, const SinkhornOptions& opts,
                           bool with_cost) {
  check_reg(reg);
  validate_weights(a, "sinkhorn_points");
  validate_weights(b, "sinkhorn_points");
  check_points(x, a, "sinkhorn_points");
  check_points(y, b, "sinkhorn_points");
  if (x.cols() != y.cols()) throw DimensionError("sinkhorn_points: dimension mismatch");
  const SqDistRows rows_f{&x, transposed(y)};
  const SqDistRows rows_g{&y, transposed(x)};
  TransportPlan p;
  if (a.size() == b.size() && a == b && x == y) {
    p = points_self(x, a, reg, opts);
  } else {
    auto polish = [&](double eps, double tol, Vector& f, Vector& g) {
      if (std::min(x.rows(), y.rows()) > kNewtonMaxDim || x.rows() * y.rows() > kNewtonMaxEntries) {
        return false;
      }
      return newton_polish(sq_euclidean_cost(x, y), a, b, eps, tol, f, g);
    };
    solve_alternating("sinkhorn_points", a, b, reg, bounding_sq_diameter(x, y), opts, rows_f,
                      rows_g, polish, p);
  }
  if (!with_cost) return p;

  const auto& k = simd::kernels();
  const auto m = static_cast<std::size_t>(y.rows());
  const auto d = static_cast<std::size_t>(y.cols());
  const double inv = 1.0 / reg;
  const Vector la = log_weights(a);
  const Vector hb = log_weights(b) + p.dual_right * inv;
  std::vector<double> c(m), w(m);
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!(a[i] > 0.0)) continue;
    k.sq_dist_row(x.row(i).data(), rows_f.yt.data(), m, d, c.data());
    k.exp_row(c.data(), hb.data(), la[i] + p.dual_left[i] * inv, inv, m, w.data());
    total += k.dot(w.data(), c.data(), m);
  }
  p.cost = total;
  return p;
}

TransportPlan points_self(const RowMatrix& x, const Vector& a, double reg,
                          const SinkhornOptions& opts) {
  check_reg(reg);
  validate_weights(a, "sinkhorn_points_symmetric");
  check_points(x, a, "sinkhorn_points_symmetric");
  const SqDistRows rows{&x, transposed(x)};
  TransportPlan p;
  solve_symmetric("sinkhorn_points_symmetric", a, reg, bounding_sq_diameter(x, x), opts, rows, p);
  return p;
}

}  // namespace

void validate_weights(const Vector& w, const char* what) {
  if (w.size() == 0) throw SizeError(std::string(what) + ": empty weight vector");
  if (!w.allFinite()) throw NumericInputError(std::string(what) + ": non-finite weights");
  if (w.minCoeff() < 0.0) throw NumericInputError(std::string(what) + ": negative weight");
  if (std::abs(w.sum() - 1.0) > 1e-9) {
    throw NumericInputError(std::string(what) + ": weights do not sum to one");
  }
}

Vector uniform_weights(Eigen::Index n) {
  if (n <= 0) throw SizeError("uniform_weights: empty measure");
  return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

RowMatrix sq_euclidean_cost(const RowMatrix& x, const RowMatrix& y) {
  if (x.cols() != y.cols()) throw DimensionError("sq_euclidean_cost: dimension mismatch");
  const RowMatrix yt = transposed(y);
  RowMatrix c(x.rows(), y.rows());
  const auto& k = simd::kernels();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    k.sq_dist_row(x.row(i).data(), yt.data(), static_cast<std::size_t>(y.rows()),
                  static_cast<std::size_t>(x.cols()), c.row(i).data());
  }
  return c;
}

double mean_cost(const RowMatrix& cost) {
  if (cost.size() == 0) return 0.0;
  return cost.mean();
}

TransportPlan sinkhorn(const RowMatrix& cost, const Vector& a, const Vector& b, double reg,
                       const SinkhornOptions& opts) {
  check_reg(reg);
  validate_weights(a, "sinkhorn");
  validate_weights(b, "sinkhorn");
  check_cost(cost, a, b);
  if (a.size() == b.size() && a == b && cost == cost.transpose()) {
    // A self-transport problem: the solution is symmetric and the averaged
    // symmetric iteration reaches it much faster than alternating updates.
    TransportPlan p = sinkhorn_symmetric(cost, a, reg, opts);
    return p;
  }
  const RowMatrix ct = transposed(cost);
  const auto m = static_cast<std::size_t>(cost.cols());
  const auto n = static_cast<std::size_t>(cost.rows());
  auto row_f = [&](Eigen::Index i, const double* h, double inv, double* scratch) {
    return simd::kernels().log_sum_exp_row(cost.row(i).data(), h, inv, m, scratch);
  };
  auto row_g = [&](Eigen::Index j, const double* h, double inv, double* scratch) {
    return simd::kernels().log_sum_exp_row(ct.row(j).data(), h, inv, n, scratch);
  };
  TransportPlan p;
  auto polish = [&](double eps, double tol, Vector& f, Vector& g) {
    return newton_polish(cost, a, b, eps, tol, f, g);
  };
  solve_alternating("sinkhorn", a, b, reg, cost.maxCoeff() - cost.minCoeff(), opts, row_f, row_g,
                    polish, p);
  build_plan(cost, a, b, p);
  return p;
}

TransportPlan sinkhorn_symmetric(const RowMatrix& cost, const Vector& a, double reg,
                                 const SinkhornOptions& opts) {
  check_reg(reg);
  validate_weights(a, "sinkhorn_symmetric");
  check_cost(cost, a, a);
  const auto n = static_cast<std::size_t>(cost.rows());
  auto row = [&](Eigen::Index i, const double* h, double inv, double* scratch) {
    return simd::kernels().log_sum_exp_row(cost.row(i).data(), h, inv, n, scratch);
  };
  TransportPlan p;
  solve_symmetric("sinkhorn_symmetric", a, reg, cost.maxCoeff() - cost.minCoeff(), opts, row, p);
  build_plan(cost, a, a, p);
  return p;
}

SinkhornDivergence sinkhorn_divergence(const RowMatrix& cost_xy, const RowMatrix& cost_xx,
                                       const RowMatrix& cost_yy, const Vector& a, const Vector& b,
                                       double reg, const SinkhornOptions& opts) {
  SinkhornOptions cross_opts = opts;
  SinkhornOptions self_opts = opts;
  self_opts.warm_start.resize(0);
  SinkhornDivergence d;
  d.cross = sinkhorn(cost_xy, a, b, reg, cross_opts);
  d.self_left = sinkhorn_symmetric(cost_xx, a, reg, self_opts);
  d.self_right = sinkhorn_symmetric(cost_yy, b, reg, self_opts);
  d.value = d.cross.objective - 0.5 * (d.self_left.objective + d.self_right.objective);
  return d;
}

TransportPlan sinkhorn_points(const RowMatrix& x, const RowMatrix& y, const Vector& a,
                              const Vector& b, double reg, const SinkhornOptions& opts) {
  return points_cross(x, y, a, b, reg, opts, true);
}

TransportPlan sinkhorn_points_symmetric(const RowMatrix& x, const Vector& a, double reg,
                                        const SinkhornOptions& opts) {
  return points_self(x, a, reg, opts);
}

double sinkhorn_divergence_points(const RowMatrix& x, const RowMatrix& y, const Vector& a,
                                  const Vector& b, double reg, const SinkhornOptions& opts) {
  SinkhornOptions cold = opts;
  cold.warm_start.resize(0);
  const double cross = points_cross(x, y, a, b, reg, cold, false).objective;
  const double sx = points_self(x, a, reg, cold).objective;
  const double sy = points_self(y, b, reg, cold).objective;
  return cross - 0.5 * (sx + sy);
}

RowMatrix ot_position_grad(const TransportPlan& plan, const RowMatrix& source,
                           const RowMatrix& target, const GroundGrad& ground_grad) {
  const RowMatrix& p = plan.plan;
  if (p.rows() != source.rows() || p.cols() != target.rows()) {
    throw DimensionError("ot_position_grad: plan shape does not match the point sets");
  }
  if (source.cols() != target.cols()) throw DimensionError("ot_position_grad: dimension mismatch");
  const auto d = static_cast<std::size_t>(source.cols());
  RowMatrix g = RowMatrix::Zero(source.rows(), source.cols());
  std::vector<double> buf(d);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double w = p(i, j);
      if (w == 0.0) continue;
      ground_grad(source.row(i).data(), target.row(j).data(), d, buf.data());
      for (std::size_t k = 0; k < d; ++k) {
        if (!std::isfinite(buf[k])) {
          throw NumericInputError("ot_position_grad: ground-cost gradient is not finite");
        }
        g(i, static_cast<Eigen::Index>(k)) += w * buf[k];
      }
    }
  }
  return g;
}

RowMatrix ot_position_grad(const TransportPlan& plan, const RowMatrix& source,
                           const RowMatrix& target) {
  const RowMatrix& p = plan.plan;
  if (p.rows() != source.rows() || p.cols() != target.rows()) {
    throw DimensionError("ot_position_grad: plan shape does not match the point sets");
  }
  if (source.cols() != target.cols()) throw DimensionError("ot_position_grad: dimension mismatch");
  const Vector rows = p.rowwise().sum();
  RowMatrix g = 2.0 * (rows.asDiagonal() * source - p * target);
  if (!g.allFinite()) throw NumericInputError("ot_position_grad: gradient is not finite");
  return g;
}

RowMatrix sinkhorn_divergence_position_grad(const SinkhornDivergence& div, const RowMatrix& x,
                                            const RowMatrix& y) {
  return ot_position_grad(div.cross, x, y) - ot_position_grad(div.self_left, x, x);
}

}  // namespace dsflow
