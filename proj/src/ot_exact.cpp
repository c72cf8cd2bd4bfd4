#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dsflow/error.hpp"
#include "dsflow/ot.hpp"

namespace dsflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_uniform(const Vector& w, Eigen::Index n) {
  const double u = 1.0 / static_cast<double>(n);
  return w.size() == n && (w.array() - u).abs().maxCoeff() <= 1e-12;
}

// Shortest augmenting path assignment with row potentials u and column
// potentials v (u_i + v_j <= C_ij, tight on the matching). O(n^3).
TransportPlan assignment(const RowMatrix& c) {
  const Eigen::Index n = c.rows();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (Eigen::Index i = 1; i <= n; ++i) {
    match[0] = i;
    Eigen::Index j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = match[j0];
      double delta = kInf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  const double w = 1.0 / static_cast<double>(n);
  TransportPlan p;
  p.plan = RowMatrix::Zero(n, n);
  p.dual_left.resize(n);
  p.dual_right.resize(n);
  for (Eigen::Index j = 1; j <= n; ++j) {
    p.plan(match[j] - 1, j - 1) = w;
    p.cost += w * c(match[j] - 1, j - 1);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    p.dual_left[i] = u[i + 1];
    p.dual_right[i] = v[i + 1];
  }
  return p;
}

struct Cell {
  Eigen::Index i;
  Eigen::Index j;
  double flow;
};

// Transportation simplex: north-west corner start, then pivots on the most
// negative reduced cost. The basis is a spanning tree over row nodes 0..n-1
// and column nodes n..n+m-1 with exactly n + m - 1 (possibly degenerate) cells.
TransportPlan transportation_simplex(const RowMatrix& c, const Vector& a, const Vector& b) {
  const Eigen::Index n = c.rows();
  const Eigen::Index m = c.cols();
  std::vector<Cell> basis;
  basis.reserve(static_cast<std::size_t>(n + m - 1));
  {
    std::vector<double> s(a.data(), a.data() + n), d(b.data(), b.data() + m);
    Eigen::Index i = 0, j = 0;
    while (true) {
      const double x = std::max(0.0, std::min(s[i], d[j]));
      basis.push_back({i, j, x});
      s[i] -= x;
      d[j] -= x;
      if (i == n - 1 && j == m - 1) break;
      if (i == n - 1) {
        ++j;
      } else if (j == m - 1) {
        ++i;
      } else if (s[i] <= d[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  const std::size_t nodes = static_cast<std::size_t>(n + m);
  std::vector<double> pot(nodes);
  std::vector<std::vector<std::size_t>> adj(nodes);
  std::vector<std::ptrdiff_t> parent_cell(nodes);
  std::vector<std::size_t> stack;
  const std::size_t max_pivots = 100 * nodes * nodes;

  auto build_adjacency = [&] {
    for (auto& l : adj) l.clear();
    for (std::size_t k = 0; k < basis.size(); ++k) {
      adj[static_cast<std::size_t>(basis[k].i)].push_back(k);
      adj[static_cast<std::size_t>(n + basis[k].j)].push_back(k);
    }
  };
  auto other = [&](std::size_t cell, std::size_t node) {
    const auto ri = static_cast<std::size_t>(basis[cell].i);
    return node == ri ? static_cast<std::size_t>(n + basis[cell].j) : ri;
  };
  // Depth-first walk from `root`, recording for each node the basis cell that
  // reached it. Potentials satisfy u_i + v_j = C_ij on every basic cell.
  auto walk = [&](std::size_t root) {
    std::fill(parent_cell.begin(), parent_cell.end(), -2);
    parent_cell[root] = -1;
    pot[root] = 0.0;
    stack.assign(1, root);
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t k : adj[node]) {
        const std::size_t next = other(k, node);
        if (parent_cell[next] != -2) continue;
        parent_cell[next] = static_cast<std::ptrdiff_t>(k);
        pot[next] = c(basis[k].i, basis[k].j) - pot[node];
        stack.push_back(next);
      }
    }
  };

  std::size_t pivots = 0;
  while (true) {
    build_adjacency();
    walk(0);
    Eigen::Index pi = -1, pj = -1;
    double best = -tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double r = c(i, j) - pot[static_cast<std::size_t>(i)] -
                         pot[static_cast<std::size_t>(n + j)];
        if (r < best) {
          best = r;
          pi = i;
          pj = j;
        }
      }
    }
    if (pi < 0) break;
    if (++pivots > max_pivots) {
      throw ConvergenceError("exact_ot: transportation simplex did not terminate", best, pivots);
    }

    // Cycle: entering cell (pi, pj), then the tree path from column pj back to
    // row pi. Cells on the path alternate -, +, -, ... starting next to pj.
    walk(static_cast<std::size_t>(pi));
    std::vector<std::size_t> path;
    for (std::size_t node = static_cast<std::size_t>(n + pj); parent_cell[node] >= 0;) {
      const auto k = static_cast<std::size_t>(parent_cell[node]);
      path.push_back(k);
      node = other(k, node);
    }
    double theta = kInf;
    std::size_t leaving = 0;
    for (std::size_t t = 0; t < path.size(); t += 2) {
      if (basis[path[t]].flow < theta) {
        theta = basis[path[t]].flow;
        leaving = path[t];
      }
    }
    for (std::size_t t = 0; t < path.size(); ++t) {
      basis[path[t]].flow += (t % 2 == 0) ? -theta : theta;
    }
    basis[leaving] = {pi, pj, theta};
  }

  TransportPlan p;
  p.plan = RowMatrix::Zero(n, m);
  for (const Cell& cell : basis) {
    p.plan(cell.i, cell.j) += std::max(0.0, cell.flow);
  }
  p.cost = (p.plan.array() * c.array()).sum();
  p.dual_left = Eigen::Map<const Vector>(pot.data(), n);
  p.dual_right = Eigen::Map<const Vector>(pot.data() + n, m);
  p.iterations = pivots;
  return p;
}

}  // namespace

TransportPlan exact_ot(const RowMatrix& cost, const Vector& a, const Vector& b) {
  if (cost.rows() > static_cast<Eigen::Index>(kExactOtMaxSize) ||
      cost.cols() > static_cast<Eigen::Index>(kExactOtMaxSize)) {
    throw SizeError("exact_ot: instance larger than " + std::to_string(kExactOtMaxSize) +
                    " points per side");
  }
  validate_weights(a, "exact_ot");
  validate_weights(b, "exact_ot");
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw DimensionError("exact_ot: cost matrix shape does not match the weights");
  }
  if (!cost.allFinite()) throw NumericInputError("exact_ot: non-finite cost entries");

  const Eigen::Index n = cost.rows();
  TransportPlan p = (n == cost.cols() && is_uniform(a, n) && is_uniform(b, n))
                        ? assignment(cost)
                        : transportation_simplex(cost, a, b);
  p.objective = a.dot(p.dual_left) + b.dot(p.dual_right);
  p.reg = 0.0;
  const double rows = (p.plan.rowwise().sum() - a).cwiseAbs().sum();
  const double cols = (p.plan.colwise().sum().transpose() - b).cwiseAbs().sum();
  p.violation = std::max(rows, cols);
  return p;
}

}  // namespace dsflow
