#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "dsflow/clustering.hpp"
#include "dsflow/error.hpp"
#include "support/oracles.hpp"

using namespace dsflow;

namespace {

struct Blobs {
  std::vector<LabelDistribution> dists;
  std::vector<int> truth;
};

// Gaussians whose means scatter (sd `spread`) around k centers `gap` apart.
Blobs blobs(int k, int per, double gap, double spread, std::mt19937_64& rng, Eigen::Index d = 2) {
  Blobs b;
  for (int c = 0; c < k; ++c) {
    Vector center = Vector::Zero(d);
    center[0] = gap * c;
    center[d - 1] += 0.5 * gap * (c % 2);
    for (int p = 0; p < per; ++p) {
      b.dists.push_back({center + oracle::randn(d, rng, spread), oracle::random_spd(d, rng, 0.5, 1.5)});
      b.truth.push_back(c);
    }
  }
  return b;
}

double dist(const LabelDistribution& a, const LabelDistribution& b) {
  return std::sqrt(std::max(0.0, oracle::bures(a.mean, a.cov, b.mean, b.cov)));
}

// Checks the DBSCAN definitions directly against pairwise oracle distances.
void check_dbscan_structure(const std::vector<LabelDistribution>& x, const ClusterAssignment& r,
                            double eps, int min_pts) {
  const std::size_t n = x.size();
  std::vector<std::size_t> degree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (dist(x[i], x[j]) <= eps) ++degree[i];
    }
  }
  auto core = [&](std::size_t i) { return degree[i] >= static_cast<std::size_t>(min_pts); };
  std::vector<std::size_t> size(static_cast<std::size_t>(r.k), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = r.labels[i];
    REQUIRE(c >= -1);
    REQUIRE(c < r.k);
    if (c >= 0) ++size[static_cast<std::size_t>(c)];
    // Core points are never noise; noise has no core point within eps.
    if (core(i)) CHECK(c >= 0);
    bool reached = core(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || dist(x[i], x[j]) > eps || !core(j)) continue;
      if (c == -1) CHECK_MESSAGE(false, "noise point within eps of a core point");
      if (r.labels[j] == c) reached = true;
      // Two core points within eps share a cluster.
      if (core(i)) CHECK(r.labels[j] == c);
    }
    if (c >= 0) CHECK(reached);
  }
  for (std::size_t c = 0; c < size.size(); ++c) CHECK(size[c] >= static_cast<std::size_t>(min_pts));
}

// Canonical partition: sets of member indices, noise kept apart.
std::set<std::set<std::size_t>> partition(const std::vector<int>& labels, const std::vector<std::size_t>& ids) {
  std::map<int, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].insert(ids[i]);
  std::set<std::set<std::size_t>> out;
  for (auto& [c, g] : groups) out.insert(c == -1 ? std::set<std::size_t>{} : g);
  return out;
}

}  // namespace

TEST_CASE("dbscan on a single point") {
  const std::vector<LabelDistribution> one{{Vector::Zero(2), Matrix::Identity(2, 2)}};
  const auto noise = dbscan_bures(one, 1.0, 2);
  CHECK(noise.k == 0);
  CHECK(noise.labels == std::vector<int>{-1});
  const auto single = dbscan_bures(one, 1.0, 1);
  CHECK(single.k == 1);
  CHECK(single.labels == std::vector<int>{0});
}

TEST_CASE("dbscan separates two groups of identical distributions") {
  std::vector<LabelDistribution> x;
  for (int i = 0; i < 10; ++i) x.push_back({Vector::Zero(2), Matrix::Identity(2, 2)});
  for (int i = 0; i < 10; ++i) x.push_back({Vector::Constant(2, 100.0), 2.0 * Matrix::Identity(2, 2)});
  const auto r = dbscan_bures(x, kDefaultDbscanEps, kDefaultDbscanMinPts);
  CHECK(r.k == 2);
  for (int i = 0; i < 20; ++i) CHECK(r.labels[static_cast<std::size_t>(i)] == (i < 10 ? 0 : 1));
}

TEST_CASE("dbscan recovers three synthetic clusters") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Blobs b = blobs(3, 20, 30.0, 1.0, rng);
    const auto r = dbscan_bures(b.dists, kDefaultDbscanEps, kDefaultDbscanMinPts);
    CHECK(r.k == 3);
    CHECK(oracle::best_permutation_agreement(r.labels, b.truth) >= 0.95);
    check_dbscan_structure(b.dists, r, kDefaultDbscanEps, kDefaultDbscanMinPts);
  }
}

TEST_CASE("dbscan structure holds on noisy data") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Blobs b = blobs(2, 12, 6.0, 1.5, rng);
    for (int i = 0; i < 6; ++i) b.dists.push_back({oracle::randn(2, rng, 20.0), Matrix::Identity(2, 2)});
    for (int min_pts : {1, 3, 5}) {
      const double eps = 2.0;
      const auto r = dbscan_bures(b.dists, eps, min_pts);
      check_dbscan_structure(b.dists, r, eps, min_pts);
      std::set<int> ids(r.labels.begin(), r.labels.end());
      ids.erase(-1);
      CHECK(static_cast<int>(ids.size()) == r.k);
      if (!ids.empty()) CHECK(*ids.rbegin() == r.k - 1);
    }
  }
}

TEST_CASE("dbscan partition is invariant under permutation") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Blobs b = blobs(4, 10, 25.0, 1.0, rng);
    std::vector<std::size_t> perm(b.dists.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<LabelDistribution> shuffled;
    for (std::size_t p : perm) shuffled.push_back(b.dists[p]);
    std::vector<std::size_t> ident(perm.size());
    std::iota(ident.begin(), ident.end(), 0);
    const auto r1 = dbscan_bures(b.dists, kDefaultDbscanEps, kDefaultDbscanMinPts);
    const auto r2 = dbscan_bures(shuffled, kDefaultDbscanEps, kDefaultDbscanMinPts);
    CHECK(partition(r1.labels, ident) == partition(r2.labels, perm));
  }
}

TEST_CASE("dbscan rejects invalid parameters") {
  const std::vector<LabelDistribution> one{{Vector::Zero(1), Matrix::Identity(1, 1)}};
  CHECK_THROWS_AS(dbscan_bures(one, -1.0, 2), ConfigError);
  CHECK_THROWS_AS(dbscan_bures(one, 1.0, 0), ConfigError);
}

TEST_CASE("kmeans with k equal to n isolates every point") {
  std::mt19937_64 rng(6);
  const Blobs b = blobs(2, 4, 5.0, 1.0, rng);
  const auto r = kmeans_embedded(b.dists, 8, 1);
  CHECK(r.k == 8);
  CHECK(std::set<int>(r.labels.begin(), r.labels.end()).size() == 8);
  CHECK(r.inertia_history.back() == doctest::Approx(0.0));
}

TEST_CASE("kmeans on identical points") {
  const std::vector<LabelDistribution> x(7, {Vector::Ones(3), Matrix::Identity(3, 3)});
  const auto r = kmeans_embedded(x, 1, 0);
  CHECK(r.k == 1);
  CHECK(std::all_of(r.labels.begin(), r.labels.end(), [](int l) { return l == 0; }));
  const auto r3 = kmeans_embedded(x, 3, 0);
  CHECK(r3.inertia_history.back() == 0.0);
}

TEST_CASE("kmeans recovers separated clusters with non-increasing inertia") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Blobs b = blobs(3, 15, 20.0, 1.0, rng, 2 + trial % 2);
    const auto r = kmeans_embedded(b.dists, 3, static_cast<std::uint64_t>(trial));
    CHECK(r.k == 3);
    CHECK(oracle::best_permutation_agreement(r.labels, b.truth) >= 0.95);
    for (std::size_t k = 1; k < r.inertia_history.size(); ++k) {
      CHECK(r.inertia_history[k] <= r.inertia_history[k - 1] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("kmeans final assignment is a fixed point") {
  std::mt19937_64 rng(8);
  const Blobs b = blobs(4, 10, 3.0, 1.5, rng);
  const auto r = kmeans_embedded(b.dists, 4, 11);
  // Embedding and centroids recomputed independently.
  const Eigen::Index d = 2;
  std::vector<Vector> emb;
  for (const auto& ld : b.dists) {
    Vector e(d + d * d);
    e.head(d) = ld.mean;
    const Matrix root = oracle::eig_sqrt(ld.cov);
    e.tail(d * d) = Eigen::Map<const Vector>(root.data(), d * d);
    emb.push_back(e);
  }
  std::vector<Vector> centers(static_cast<std::size_t>(r.k), Vector::Zero(d + d * d));
  std::vector<int> count(static_cast<std::size_t>(r.k), 0);
  for (std::size_t i = 0; i < emb.size(); ++i) {
    centers[static_cast<std::size_t>(r.labels[i])] += emb[i];
    ++count[static_cast<std::size_t>(r.labels[i])];
  }
  for (std::size_t c = 0; c < centers.size(); ++c) centers[c] /= count[c];
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const double own = (emb[i] - centers[static_cast<std::size_t>(r.labels[i])]).squaredNorm();
    for (const auto& c : centers) CHECK(own <= (emb[i] - c).squaredNorm() + 1e-9);
  }
}

TEST_CASE("kmeans is deterministic per seed and rejects k above n") {
  std::mt19937_64 rng(9);
  const Blobs b = blobs(3, 6, 2.0, 2.0, rng);
  CHECK(kmeans_embedded(b.dists, 3, 42).labels == kmeans_embedded(b.dists, 3, 42).labels);
  CHECK_THROWS_AS(kmeans_embedded(b.dists, 19, 0), SizeError);
  CHECK_THROWS_AS(kmeans_embedded(b.dists, 0, 0), ConfigError);
}
