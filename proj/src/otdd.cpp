#include "dsflow/otdd.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dsflow/error.hpp"

namespace dsflow {
namespace {

// Label distributions of one side of the transport problem. A slot is a
// class (fd / jd-fl) or a particle (jd-vl); slot_of maps particles to slots.
struct Slots {
  std::vector<const LabelDistribution*> dists;
  std::vector<Eigen::Index> slot_of;
  Vector mass;
};

Slots make_slots(const DatasetState& s) {
  Slots out;
  const Eigen::Index n = s.size();
  out.slot_of.resize(static_cast<std::size_t>(n));
  if (s.per_particle()) {
    if (static_cast<Eigen::Index>(s.particle_dists.size()) != n) {
      throw DimensionError("otdd: per-particle distributions do not match the particle count");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      out.dists.push_back(&s.particle_dists[static_cast<std::size_t>(i)]);
      out.slot_of[static_cast<std::size_t>(i)] = i;
    }
    out.mass = s.weights;
    return out;
  }
  std::map<int, Eigen::Index> index;
  for (const auto& [y, ld] : s.class_dists) {
    index[y] = static_cast<Eigen::Index>(out.dists.size());
    out.dists.push_back(&ld);
  }
  out.mass = Vector::Zero(static_cast<Eigen::Index>(out.dists.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = s.labels[static_cast<std::size_t>(i)];
    const auto it = index.find(y);
    if (it == index.end()) {
      throw DegenerateClassError("otdd: no label distribution for class " + std::to_string(y), y);
    }
    out.slot_of[static_cast<std::size_t>(i)] = it->second;
    out.mass[it->second] += s.weights[i];
  }
  return out;
}

void check_pair(const DatasetState& src, const DatasetState& dst) {
  if (src.dim() != dst.dim()) throw DimensionError("otdd: feature dimension mismatch");
  if (src.size() == 0 || dst.size() == 0) throw SizeError("otdd: empty dataset");
  if (static_cast<Eigen::Index>(src.labels.size()) != src.size() ||
      static_cast<Eigen::Index>(dst.labels.size()) != dst.size()) {
    throw DimensionError("otdd: label count differs from particle count");
  }
}

RowMatrix label_table(const Slots& a, const Slots& b) {
  RowMatrix t(static_cast<Eigen::Index>(a.dists.size()), static_cast<Eigen::Index>(b.dists.size()));
  for (Eigen::Index s = 0; s < t.rows(); ++s) {
    const BuresAnchor anchor(*a.dists[static_cast<std::size_t>(s)]);
    for (Eigen::Index u = 0; u < t.cols(); ++u) {
      t(s, u) = anchor.w2_sq(*b.dists[static_cast<std::size_t>(u)]);
    }
  }
  return t;
}

RowMatrix self_label_table(const Slots& a) {
  const auto k = static_cast<Eigen::Index>(a.dists.size());
  RowMatrix t = RowMatrix::Zero(k, k);
  for (Eigen::Index s = 0; s < k; ++s) {
    const BuresAnchor anchor(*a.dists[static_cast<std::size_t>(s)]);
    for (Eigen::Index u = s + 1; u < k; ++u) {
      t(s, u) = t(u, s) = anchor.w2_sq(*a.dists[static_cast<std::size_t>(u)]);
    }
  }
  return t;
}

RowMatrix assemble_cost(const RowMatrix& x, const RowMatrix& y, const Slots& a, const Slots& b,
                        const RowMatrix& table) {
  RowMatrix c = sq_euclidean_cost(x, y);
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const auto row = table.row(a.slot_of[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      c(i, j) += row[b.slot_of[static_cast<std::size_t>(j)]];
    }
  }
  return c;
}

// M(s, t) = sum of plan_ij over particles i in slot s and j in slot t.
RowMatrix slot_mass(const RowMatrix& plan, const Slots& a, const Slots& b) {
  RowMatrix by_col = RowMatrix::Zero(plan.rows(), static_cast<Eigen::Index>(b.dists.size()));
  for (Eigen::Index j = 0; j < plan.cols(); ++j) {
    by_col.col(b.slot_of[static_cast<std::size_t>(j)]) += plan.col(j);
  }
  RowMatrix m = RowMatrix::Zero(static_cast<Eigen::Index>(a.dists.size()), by_col.cols());
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    m.row(a.slot_of[static_cast<std::size_t>(i)]) += by_col.row(i);
  }
  return m;
}

RowMatrix row_scaled_inverse(const RowMatrix& g, const Vector& mass) {
  RowMatrix out = g;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    out.row(i) = mass[i] > 0.0 ? RowMatrix(g.row(i) / mass[i]) : RowMatrix::Zero(1, g.cols());
  }
  return out;
}

}  // namespace

RowMatrix ground_cost_matrix(const DatasetState& src, const DatasetState& dst) {
  check_pair(src, dst);
  const Slots a = make_slots(src);
  const Slots b = make_slots(dst);
  return assemble_cost(src.features, dst.features, a, b, label_table(a, b));
}

double default_reg(const DatasetState& src, const DatasetState& dst) {
  const double m = mean_cost(ground_cost_matrix(src, dst));
  return m > 0.0 ? kDefaultRegFactor * m : 1.0;
}

OtddResult otdd(const DatasetState& src, const DatasetState& dst, const OtddOptions& opts,
                OtddWorkspace* ws) {
  check_pair(src, dst);
  validate_weights(src.weights, "otdd source");
  validate_weights(dst.weights, "otdd target");
  const Slots a = make_slots(src);
  const Slots b = make_slots(dst);
  const RowMatrix cxy = assemble_cost(src.features, dst.features, a, b, label_table(a, b));

  OtddResult r;
  r.debiased = opts.debiased;
  if (opts.reg > 0.0) {
    r.reg = opts.reg;
  } else {
    const double m = mean_cost(cxy);
    r.reg = m > 0.0 ? kDefaultRegFactor * m : 1.0;
  }

  SinkhornOptions so = opts.sinkhorn;
  if (ws != nullptr) so.warm_start = ws->cross_potential;
  r.cross = sinkhorn(cxy, src.weights, dst.weights, r.reg, so);
  r.divergence = r.cross.objective;

  if (opts.debiased) {
    const RowMatrix cxx = assemble_cost(src.features, src.features, a, a, self_label_table(a));
    SinkhornOptions self_opts = opts.sinkhorn;
    if (ws != nullptr) self_opts.warm_start = ws->self_potential;
    r.self_src = sinkhorn_symmetric(cxx, src.weights, r.reg, self_opts);
    if (ws != nullptr && ws->has_target_self && ws->target_reg == r.reg) {
      r.self_dst = ws->target_self;
    } else {
      const RowMatrix cyy = assemble_cost(dst.features, dst.features, b, b, self_label_table(b));
      SinkhornOptions cold = opts.sinkhorn;
      cold.warm_start.resize(0);
      r.self_dst = sinkhorn_symmetric(cyy, dst.weights, r.reg, cold);
      if (ws != nullptr) {
        ws->has_target_self = true;
        ws->target_reg = r.reg;
        ws->target_self = r.self_dst;
      }
    }
    r.divergence -= 0.5 * (r.self_src.objective + r.self_dst.objective);
  }
  if (ws != nullptr) {
    ws->cross_potential = r.cross.dual_right;
    if (opts.debiased) ws->self_potential = r.self_src.dual_left;
  }
  r.value = std::sqrt(std::max(r.divergence, 0.0));
  return r;
}

FlowGradients otdd_grads(const DatasetState& src, const DatasetState& dst,
                         const OtddResult& result, DynamicsMode mode) {
  check_pair(src, dst);
  const Eigen::Index n = src.size();
  if (result.cross.plan.rows() != n || result.cross.plan.cols() != dst.size()) {
    throw DimensionError("otdd_grads: plan does not match the datasets");
  }
  if (result.debiased && (result.self_src.plan.rows() != n || result.self_src.plan.cols() != n)) {
    throw DimensionError("otdd_grads: source self-transport plan missing");
  }
  if ((mode == DynamicsMode::jd_vl) != src.per_particle()) {
    throw DimensionError(std::string("otdd_grads: state layout does not match mode ") +
                         std::string(mode_name(mode)));
  }

  FlowGradients g;
  RowMatrix gx = ot_position_grad(result.cross, src.features, dst.features);
  if (result.debiased) gx -= ot_position_grad(result.self_src, src.features, src.features);
  g.d_features = row_scaled_inverse(gx, src.weights);
  if (mode == DynamicsMode::fd) return g;

  const Slots a = make_slots(src);
  const Slots b = make_slots(dst);
  const RowMatrix cross_mass = slot_mass(result.cross.plan, a, b);
  RowMatrix self_mass;
  if (result.debiased) self_mass = slot_mass(result.self_src.plan, a, a);

  const Eigen::Index d = src.dim();
  const auto slots = static_cast<Eigen::Index>(a.dists.size());
  g.d_means.assign(static_cast<std::size_t>(slots), Vector::Zero(d));
  g.d_covs.assign(static_cast<std::size_t>(slots), Matrix::Zero(d, d));
  for (Eigen::Index s = 0; s < slots; ++s) {
    const LabelDistribution& own = *a.dists[static_cast<std::size_t>(s)];
    const BuresAnchor anchor(own);
    Vector& gm = g.d_means[static_cast<std::size_t>(s)];
    Matrix& gc = g.d_covs[static_cast<std::size_t>(s)];
    auto accumulate = [&](double w, const LabelDistribution& other) {
      if (w == 0.0 || other == own) return;
      const BuresGradient bg = anchor.grad(other);
      gm += w * bg.mean;
      gc += w * bg.cov;
    };
    for (Eigen::Index t = 0; t < cross_mass.cols(); ++t) {
      accumulate(cross_mass(s, t), *b.dists[static_cast<std::size_t>(t)]);
    }
    if (result.debiased) {
      for (Eigen::Index t = 0; t < slots; ++t) {
        accumulate(-self_mass(s, t), *a.dists[static_cast<std::size_t>(t)]);
      }
    }
    const double mass = a.mass[s];
    if (mass > 0.0) {
      gm /= mass;
      gc /= mass;
    } else {
      gm.setZero();
      gc.setZero();
    }
  }
  return g;
}

}  // namespace dsflow
