#pragma once

// Clustering of per-particle Gaussian label distributions, used to turn the
// continuous labels of jd-vl dynamics back into discrete classes.

#include <cstdint>
#include <vector>

#include "dsflow/gaussian.hpp"

namespace dsflow {

struct ClusterAssignment {
  std::vector<int> labels;  // cluster id per input, -1 for DBSCAN noise
  int k = 0;                // clusters found; ids are 0..k-1
  std::vector<double> inertia_history;  // k-means only, one entry per Lloyd iteration
};

inline constexpr double kDefaultDbscanEps = 5.0;
inline constexpr int kDefaultDbscanMinPts = 4;

// DBSCAN under d = sqrt(bures_w2_sq). Points are scanned in input order and a
// border point joins the first cluster that reaches it.
ClusterAssignment dbscan_bures(const std::vector<LabelDistribution>& dists, double eps,
                               int min_pts);

// Lloyd iterations with k-means++ seeding on the embedding
// [mu ; vec(Sigma^1/2)], run until the assignment stops changing.
ClusterAssignment kmeans_embedded(const std::vector<LabelDistribution>& dists, int k,
                                  std::uint64_t seed, int max_iter = 300);

}  // namespace dsflow
