#pragma once

// Central-difference checks of otdd_grads. The value differentiated is the
// (debiased) entropic transport value at a fixed regularization; analytic
// gradients are per unit mass, so they are scaled by the particle or class
// mass before comparison.

#include <vector>

#include "dsflow/otdd.hpp"
#include "support/oracles.hpp"

namespace oracle {

struct GradErrors {
  double features = 0.0;
  double means = 0.0;  // 0 when the mode has no label gradients
  double covs = 0.0;
};

inline dsflow::OtddOptions tight_otdd(double reg) {
  dsflow::OtddOptions o;
  o.reg = reg;
  o.sinkhorn.tol = 1e-11;
  o.sinkhorn.max_iter = 200000;
  return o;
}

inline double relative(const std::vector<double>& got, const std::vector<double>& want) {
  const Vector g = Eigen::Map<const Vector>(got.data(), static_cast<Eigen::Index>(got.size()));
  const Vector w = Eigen::Map<const Vector>(want.data(), static_cast<Eigen::Index>(want.size()));
  return (g - w).norm() / std::max(w.norm(), 1e-8);
}

inline GradErrors otdd_grad_errors(const dsflow::DatasetState& src, const dsflow::DatasetState& dst,
                                   dsflow::DynamicsMode mode, double reg, double h = 1e-5) {
  using namespace dsflow;
  const OtddOptions opts = tight_otdd(reg);
  OtddWorkspace base;
  const OtddResult r = otdd(src, dst, opts, &base);
  const FlowGradients g = otdd_grads(src, dst, r, mode);

  // Warm-started from the unperturbed potentials; a fresh copy per evaluation.
  auto value = [&](const DatasetState& s) {
    OtddWorkspace ws = base;
    return otdd(s, dst, opts, &ws).divergence;
  };

  GradErrors out;
  std::vector<double> an;
  std::vector<double> fd;
  DatasetState s = src;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    for (Eigen::Index k = 0; k < s.dim(); ++k) {
      const double x0 = s.features(i, k);
      s.features(i, k) = x0 + h;
      const double up = value(s);
      s.features(i, k) = x0 - h;
      const double down = value(s);
      s.features(i, k) = x0;
      fd.push_back((up - down) / (2.0 * h));
      an.push_back(src.weights[i] * g.d_features(i, k));
    }
  }
  out.features = relative(an, fd);
  if (mode == DynamicsMode::fd) return out;

  // Slot masses in the order of the gradient blocks.
  std::vector<LabelDistribution*> slots;
  std::vector<double> mass;
  if (mode == DynamicsMode::jd_vl) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      slots.push_back(&s.particle_dists[static_cast<std::size_t>(i)]);
      mass.push_back(s.weights[i]);
    }
  } else {
    for (auto& [y, ld] : s.class_dists) {
      slots.push_back(&ld);
      double m = 0.0;
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s.labels[static_cast<std::size_t>(i)] == y) m += s.weights[i];
      }
      mass.push_back(m);
    }
  }

  std::vector<double> an_m, fd_m, an_c, fd_c;
  const Eigen::Index d = s.dim();
  for (std::size_t q = 0; q < slots.size(); ++q) {
    LabelDistribution& ld = *slots[q];
    for (Eigen::Index k = 0; k < d; ++k) {
      const double m0 = ld.mean[k];
      ld.mean[k] = m0 + h;
      const double up = value(s);
      ld.mean[k] = m0 - h;
      const double down = value(s);
      ld.mean[k] = m0;
      fd_m.push_back((up - down) / (2.0 * h));
      an_m.push_back(mass[q] * g.d_means[q][k]);
    }
    // Symmetric directions e_k e_l^T + e_l e_k^T.
    for (Eigen::Index k = 0; k < d; ++k) {
      for (Eigen::Index l = k; l < d; ++l) {
        const Matrix c0 = ld.cov;
        Matrix e = Matrix::Zero(d, d);
        e(k, l) += 1.0;
        if (k != l) e(l, k) += 1.0;
        ld.cov = c0 + h * e;
        const double up = value(s);
        ld.cov = c0 - h * e;
        const double down = value(s);
        ld.cov = c0;
        fd_c.push_back((up - down) / (2.0 * h));
        const Matrix& gc = g.d_covs[q];
        an_c.push_back(mass[q] * (k == l ? gc(k, k) : gc(k, l) + gc(l, k)));
      }
    }
  }
  out.means = relative(an_m, fd_m);
  out.covs = relative(an_c, fd_c);
  return out;
}

}  // namespace oracle
