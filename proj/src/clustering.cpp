#include "dsflow/clustering.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <string>

#include "dsflow/error.hpp"

namespace dsflow {

ClusterAssignment dbscan_bures(const std::vector<LabelDistribution>& dists, double eps,
                               int min_pts) {
  if (!(eps >= 0.0)) throw ConfigError("dbscan: eps must be nonnegative");
  if (min_pts < 1) throw ConfigError("dbscan: min_pts must be at least 1");
  const std::size_t n = dists.size();
  const double eps2 = eps * eps;

  // Neighbourhoods include the point itself.
  std::vector<std::vector<std::size_t>> nbr(n);
  for (std::size_t i = 0; i < n; ++i) {
    nbr[i].push_back(i);
    const BuresAnchor anchor(dists[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (anchor.w2_sq(dists[j]) <= eps2) {
        nbr[i].push_back(j);
        nbr[j].push_back(i);
      }
    }
  }

  constexpr int kUnvisited = -2;
  ClusterAssignment out;
  out.labels.assign(n, kUnvisited);
  const auto min_size = static_cast<std::size_t>(min_pts);
  for (std::size_t i = 0; i < n; ++i) {
    if (out.labels[i] != kUnvisited) continue;
    if (nbr[i].size() < min_size) {
      out.labels[i] = -1;
      continue;
    }
    const int id = out.k++;
    out.labels[i] = id;
    std::deque<std::size_t> queue(nbr[i].begin(), nbr[i].end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (out.labels[j] == -1) out.labels[j] = id;  // noise becomes border
      if (out.labels[j] != kUnvisited) continue;
      out.labels[j] = id;
      if (nbr[j].size() >= min_size) queue.insert(queue.end(), nbr[j].begin(), nbr[j].end());
    }
  }
  return out;
}

ClusterAssignment kmeans_embedded(const std::vector<LabelDistribution>& dists, int k,
                                  std::uint64_t seed, int max_iter) {
  const auto n = static_cast<Eigen::Index>(dists.size());
  if (k < 1) throw ConfigError("kmeans: k must be at least 1");
  if (k > n) {
    throw SizeError("kmeans: k = " + std::to_string(k) + " exceeds the " + std::to_string(n) +
                    " points");
  }
  const Eigen::Index d = dists.front().dim();
  RowMatrix e(n, d + d * d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ld = dists[static_cast<std::size_t>(i)];
    if (ld.dim() != d) throw DimensionError("kmeans: mixed dimensions");
    const Matrix root = spd_sqrt(ld.cov);
    e.row(i).head(d) = ld.mean.transpose();
    e.row(i).tail(d * d) = Eigen::Map<const Vector>(root.data(), d * d).transpose();
  }

  std::mt19937_64 rng(seed);
  RowMatrix centers(k, e.cols());
  Vector best = Vector::Constant(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  auto pick = [&](Eigen::Index c, Eigen::Index i) {
    centers.row(c) = e.row(i);
    chosen[static_cast<std::size_t>(i)] = 1;
    for (Eigen::Index j = 0; j < n; ++j) best[j] = std::min(best[j], (e.row(j) - e.row(i)).squaredNorm());
  };
  pick(0, std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = best.sum();
    Eigen::Index next = -1;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (best[j] <= 0.0) continue;
        next = j;
        u -= best[j];
        if (u < 0.0) break;
      }
    }
    if (next < 0) {
      // Every point coincides with a center: take the first unused index.
      for (Eigen::Index j = 0; j < n && next < 0; ++j) {
        if (!chosen[static_cast<std::size_t>(j)]) next = j;
      }
    }
    pick(c, next);
  }

  ClusterAssignment out;
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double dmin = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double dc = (e.row(i) - centers.row(c)).squaredNorm();
        if (dc < dmin) {
          dmin = dc;
          arg = static_cast<int>(c);
        }
      }
      inertia += dmin;
      if (assign[static_cast<std::size_t>(i)] != arg) {
        assign[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    out.inertia_history.push_back(inertia);
    if (!changed) break;
    RowMatrix sums = RowMatrix::Zero(k, e.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += e.row(i);
      counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] += 1;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      }
    }
  }

  // Renumber non-empty clusters by first appearance.
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  out.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int& r = remap[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    if (r < 0) r = out.k++;
    out.labels[static_cast<std::size_t>(i)] = r;
  }
  return out;
}

}  // namespace dsflow
