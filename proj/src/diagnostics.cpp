#include "dsflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "dsflow/error.hpp"

namespace dsflow {
namespace {

void require_matchable(const DatasetState& a, const DatasetState& b) {
  if (a.size() == 0 || b.size() == 0) throw SizeError("geodesic: empty dataset");
  if (a.size() != b.size()) throw SizeError("geodesic: datasets differ in size");
  if (a.dim() != b.dim()) throw DimensionError("geodesic: feature dimension mismatch");
  if (a.size() > static_cast<Eigen::Index>(kExactOtMaxSize)) {
    throw SizeError("geodesic: more than " + std::to_string(kExactOtMaxSize) + " particles");
  }
  const Vector u = uniform_weights(a.size());
  if ((a.weights - u).cwiseAbs().maxCoeff() > 1e-12 || (b.weights - u).cwiseAbs().maxCoeff() > 1e-12) {
    throw SizeError("geodesic: weights must be uniform");
  }
}

// sigma[i] = partner of particle i of `a` in `b`.
std::vector<Eigen::Index> matching(const DatasetState& a, const DatasetState& b) {
  require_matchable(a, b);
  const TransportPlan p = exact_ot(sq_euclidean_cost(a.features, b.features), a.weights, b.weights);
  std::vector<Eigen::Index> sigma(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) p.plan.row(i).maxCoeff(&sigma[static_cast<std::size_t>(i)]);
  return sigma;
}

DatasetState with_features(const DatasetState& like, RowMatrix features, std::vector<int> labels) {
  DatasetState s;
  s.features = std::move(features);
  s.labels = std::move(labels);
  s.weights = like.weights;
  refresh_label_stats(s);
  return s;
}

std::string describe(const FunctionalSpec& spec) {
  std::string out;
  for (const auto& n : spec.term_names()) out += (out.empty() ? "" : "+") + n;
  return out;
}

}  // namespace

DatasetState displacement_interpolant(const DatasetState& a, const DatasetState& b, double t) {
  const auto sigma = matching(a, b);
  RowMatrix x(a.size(), a.dim());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    x.row(i) = (1.0 - t) * a.features.row(i) + t * b.features.row(sigma[static_cast<std::size_t>(i)]);
  }
  return with_features(a, std::move(x), a.labels);
}

DatasetState generalized_interpolant(const DatasetState& base, const DatasetState& a,
                                     const DatasetState& b, double t) {
  const auto sa = matching(base, a);
  const auto sb = matching(base, b);
  RowMatrix x(base.size(), base.dim());
  std::vector<int> labels(static_cast<std::size_t>(base.size()));
  for (Eigen::Index k = 0; k < base.size(); ++k) {
    const Eigen::Index i = sa[static_cast<std::size_t>(k)];
    const Eigen::Index j = sb[static_cast<std::size_t>(k)];
    x.row(k) = (1.0 - t) * a.features.row(i) + t * b.features.row(j);
    labels[static_cast<std::size_t>(k)] = a.labels[static_cast<std::size_t>(i)];
  }
  return with_features(base, std::move(x), std::move(labels));
}

double feature_w2_sq(const DatasetState& a, const DatasetState& b) {
  if (a.dim() != b.dim()) throw DimensionError("feature_w2_sq: dimension mismatch");
  return exact_ot(sq_euclidean_cost(a.features, b.features), a.weights, b.weights).cost;
}

ConvexityReport check_displacement_convexity(const FunctionalSpec& functional,
                                             const DatasetState& a, const DatasetState& b,
                                             double lambda_claimed, const DatasetState* base) {
  FunctionalSpec spec = functional;
  for (Term& term : spec.terms) {
    if (term.kind == TermKind::target_distance && term.target && !(term.otdd.reg > 0.0)) {
      term.otdd.reg = default_reg(a, *term.target);
    }
  }
  validate_spec(spec, a.dim());

  auto point = [&](double t) {
    return base ? generalized_interpolant(*base, a, b, t) : displacement_interpolant(a, b, t);
  };
  ConvexityReport r;
  r.functional = describe(spec);
  r.lambda_claimed = lambda_claimed;
  {
    const DatasetState p0 = point(0.0);
    const DatasetState p1 = point(1.0);
    r.w2_sq = p0.weights.dot((p0.features - p1.features).rowwise().squaredNorm());
  }
  const double f0 = eval_functional(point(0.0), spec);
  const double f1 = eval_functional(point(1.0), spec);
  for (int k = 0; k <= 10; ++k) {
    const double t = k / 10.0;
    ConvexitySample s;
    s.t = t;
    s.lhs = eval_functional(point(t), spec);
    s.rhs = (1.0 - t) * f0 + t * f1 - 0.5 * lambda_claimed * t * (1.0 - t) * r.w2_sq;
    r.max_violation = std::max(r.max_violation, s.lhs - s.rhs);
    r.samples.push_back(s);
  }
  return r;
}

ContractionReport check_flow_contraction(const DatasetState& a, const DatasetState& b,
                                         const FlowConfig& config, double lambda) {
  const Trajectory ta = run_flow(a, config);
  const Trajectory tb = run_flow(b, config);
  if (ta.snapshots.size() != tb.snapshots.size()) {
    throw SizeError("contraction: flows recorded different numbers of snapshots");
  }
  ContractionReport r;
  r.lambda = lambda;
  double delta0 = 0.0;
  for (std::size_t k = 0; k < ta.snapshots.size(); ++k) {
    ContractionSample s;
    s.step = ta.snapshots[k].step;
    s.time = static_cast<double>(s.step) * config.optimizer.step_size;
    s.delta = 0.5 * feature_w2_sq(ta.snapshots[k].state, tb.snapshots[k].state);
    if (k == 0) delta0 = s.delta;
    s.bound = delta0 * std::exp(-2.0 * lambda * s.time);
    if (s.bound > 0.0) r.max_bound_ratio = std::max(r.max_bound_ratio, s.delta / s.bound);
    if (k > 0 && s.delta > 1.05 * r.samples.back().delta + 1e-15) r.monotone = false;
    r.samples.push_back(s);
  }
  return r;
}

double oracle_accuracy_proxy(const DatasetState& flowed, const DatasetState& source_train) {
  if (flowed.size() == 0 || source_train.size() == 0) {
    throw SizeError("accuracy proxy: empty dataset");
  }
  if (flowed.dim() != source_train.dim()) {
    throw DimensionError("accuracy proxy: feature dimension mismatch");
  }
  std::map<int, Vector> sums;
  std::map<int, double> mass;
  for (Eigen::Index i = 0; i < source_train.size(); ++i) {
    const int y = source_train.labels[static_cast<std::size_t>(i)];
    auto [it, fresh] = sums.try_emplace(y, Vector::Zero(source_train.dim()));
    it->second += source_train.features.row(i).transpose();
    mass[y] += 1.0;
  }
  std::vector<int> src_classes;
  RowMatrix centroids(static_cast<Eigen::Index>(sums.size()), source_train.dim());
  for (const auto& [y, s] : sums) {
    centroids.row(static_cast<Eigen::Index>(src_classes.size())) = (s / mass[y]).transpose();
    src_classes.push_back(y);
  }
  const std::vector<int> flow_classes = flowed.class_ids();
  std::map<int, Eigen::Index> flow_index;
  for (std::size_t k = 0; k < flow_classes.size(); ++k) {
    flow_index[flow_classes[k]] = static_cast<Eigen::Index>(k);
  }

  // confusion(flowed class, predicted source class) in particle mass.
  RowMatrix confusion = RowMatrix::Zero(static_cast<Eigen::Index>(flow_classes.size()),
                                        centroids.rows());
  const double total = flowed.weights.sum();
  for (Eigen::Index i = 0; i < flowed.size(); ++i) {
    Eigen::Index pred = 0;
    (centroids.rowwise() - flowed.features.row(i)).rowwise().squaredNorm().minCoeff(&pred);
    confusion(flow_index[flowed.labels[static_cast<std::size_t>(i)]], pred) += flowed.weights[i];
  }
  if (confusion.rows() == confusion.cols() &&
      confusion.rows() <= static_cast<Eigen::Index>(kExactOtMaxSize)) {
    const Vector u = uniform_weights(confusion.rows());
    const TransportPlan p = exact_ot(-confusion, u, u);
    return -p.cost * static_cast<double>(confusion.rows()) / total;
  }
  return confusion.rowwise().maxCoeff().sum() / total;
}

}  // namespace dsflow
