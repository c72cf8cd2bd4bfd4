#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "dsflow/error.hpp"
#include "dsflow/optim.hpp"
#include "support/oracles.hpp"

using namespace dsflow;

namespace {

DatasetState single_point(double x, double y) {
  RowMatrix f(1, 2);
  f << x, y;
  return make_state(f, {0});
}

FlowGradients feature_grad(const RowMatrix& g) {
  FlowGradients out;
  out.d_features = g;
  return out;
}

DatasetState labeled(std::mt19937_64& rng, Eigen::Index n = 9) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % 3);
  return make_state(oracle::randn(n, 2, rng), y);
}

// Scalar reference rules, written out per coordinate.
struct RefAdam {
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double x, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mh = m / (1.0 - std::pow(b1, t));
    const double vh = v / (1.0 - std::pow(b2, t));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST_CASE("rule names round-trip") {
  for (auto r : {OptimizerRule::sgd, OptimizerRule::momentum, OptimizerRule::adam, OptimizerRule::adagrad}) {
    CHECK(parse_rule(rule_name(r)) == r);
  }
  CHECK_THROWS_AS(parse_rule("lbfgs"), ConfigError);
}

TEST_CASE("sgd takes one Euler step") {
  DatasetState s = single_point(1.0, 0.0);
  OptimizerConfig c;
  c.step_size = 0.1;
  OptimizerState opt(c);
  RowMatrix g(1, 2);
  g << 10.0, 0.0;
  apply_step(s, feature_grad(g), opt, DynamicsMode::fd);
  CHECK(s.features(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.features(0, 1) == 0.0);
  CHECK(opt.step_count == 1);
}

TEST_CASE("zero gradient is a fixed point for sgd, momentum and adagrad") {
  std::mt19937_64 rng(1);
  for (auto rule : {OptimizerRule::sgd, OptimizerRule::momentum, OptimizerRule::adagrad, OptimizerRule::adam}) {
    CAPTURE(rule_name(rule));
    DatasetState s = labeled(rng);
    const DatasetState before = s;
    OptimizerConfig c;
    c.rule = rule;
    OptimizerState opt(c);
    const FlowGradients z = FlowGradients::zeros(s, DynamicsMode::jd_fl);
    for (int k = 0; k < 3; ++k) apply_step(s, z, opt, DynamicsMode::jd_fl);
    CHECK(s.features == before.features);
    for (const auto& [y, ld] : s.class_dists) {
      CHECK(ld.mean == before.class_dists.at(y).mean);
      CHECK((ld.cov - before.class_dists.at(y).cov).norm() == 0.0);
    }
    CHECK(opt.step_count == 3);
  }
}

TEST_CASE("sgd is linear in the gradient") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    DatasetState a = labeled(rng);
    DatasetState b = a;
    const RowMatrix g1 = oracle::randn(a.size(), 2, rng);
    const RowMatrix g2 = oracle::randn(a.size(), 2, rng);
    OptimizerConfig c;
    c.step_size = 0.125;
    OptimizerState oa(c), ob(c);
    apply_step(a, feature_grad(g1 + g2), oa, DynamicsMode::fd);
    apply_step(b, feature_grad(g1), ob, DynamicsMode::fd);
    apply_step(b, feature_grad(g2), ob, DynamicsMode::fd);
    CHECK((a.features - b.features).cwiseAbs().maxCoeff() <= 8.0 * std::numeric_limits<double>::epsilon() *
                                                             std::max(1.0, a.features.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("adam matches a scalar reference and minimizes a quadratic") {
  DatasetState s = single_point(3.0, 4.0);
  OptimizerConfig c;
  c.rule = OptimizerRule::adam;
  c.step_size = 0.05;
  OptimizerState opt(c);
  RefAdam rx, ry;
  double x = 3.0, y = 4.0;
  for (int k = 0; k < 200; ++k) {
    // Gradient of 1/2 ||x||^2.
    apply_step(s, feature_grad(s.features), opt, DynamicsMode::fd, static_cast<std::size_t>(k));
    const double gx = x, gy = y;
    x = rx.step(x, gx, 0.05);
    y = ry.step(y, gy, 0.05);
  }
  CHECK(s.features(0, 0) == doctest::Approx(x).epsilon(1e-9));
  CHECK(s.features(0, 1) == doctest::Approx(y).epsilon(1e-9));
  CHECK(std::hypot(x, y) < 1e-2);
  CHECK(s.features.norm() < 1e-2);
}

TEST_CASE("momentum and adagrad match scalar references") {
  std::mt19937_64 rng(3);
  const RowMatrix x0 = oracle::randn(4, 3, rng);
  std::vector<RowMatrix> gs;
  for (int k = 0; k < 10; ++k) gs.push_back(oracle::randn(4, 3, rng));

  OptimizerConfig cm;
  cm.rule = OptimizerRule::momentum;
  cm.step_size = 0.1;
  cm.momentum = 0.8;
  DatasetState sm = make_state(x0, {0, 0, 1, 1});
  OptimizerState om(cm);
  RowMatrix xm = x0, buf = RowMatrix::Zero(4, 3);

  OptimizerConfig ca;
  ca.rule = OptimizerRule::adagrad;
  ca.step_size = 0.1;
  DatasetState sa = make_state(x0, {0, 0, 1, 1});
  OptimizerState oa(ca);
  RowMatrix xa = x0, acc = RowMatrix::Zero(4, 3);

  for (const auto& g : gs) {
    apply_step(sm, feature_grad(g), om, DynamicsMode::fd);
    apply_step(sa, feature_grad(g), oa, DynamicsMode::fd);
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index k = 0; k < 3; ++k) {
        buf(i, k) = 0.8 * buf(i, k) + g(i, k);
        xm(i, k) -= 0.1 * buf(i, k);
        acc(i, k) += g(i, k) * g(i, k);
        xa(i, k) -= 0.1 * g(i, k) / (std::sqrt(acc(i, k)) + 1e-10);
      }
    }
  }
  CHECK((sm.features - xm).norm() <= 1e-12 * xm.norm());
  CHECK((sa.features - xa).norm() <= 1e-12 * xa.norm());
}

TEST_CASE("first adam step is bounded by the step size") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    DatasetState s = labeled(rng);
    const RowMatrix before = s.features;
    const double scale = std::pow(10.0, -6.0 + 12.0 * (trial / 49.0));
    const RowMatrix g = scale * oracle::randn(s.size(), 2, rng);
    OptimizerConfig c;
    c.rule = OptimizerRule::adam;
    c.step_size = 0.03;
    OptimizerState opt(c);
    apply_step(s, feature_grad(g), opt, DynamicsMode::fd);
    CHECK((s.features - before).cwiseAbs().maxCoeff() <= 0.03 * (1.0 + 1e-9));
  }
}

TEST_CASE("covariance blocks stay positive definite") {
  std::mt19937_64 rng(5);
  for (auto rule : {OptimizerRule::sgd, OptimizerRule::momentum, OptimizerRule::adam, OptimizerRule::adagrad}) {
    DatasetState s = labeled(rng);
    decouple(s);
    OptimizerConfig c;
    c.rule = rule;
    c.step_size = 0.5;
    OptimizerState opt(c);
    for (int k = 0; k < 20; ++k) {
      FlowGradients g = FlowGradients::zeros(s, DynamicsMode::jd_vl);
      g.d_features = oracle::randn(s.size(), 2, rng);
      for (std::size_t q = 0; q < g.d_covs.size(); ++q) {
        g.d_means[q] = oracle::randn(2, rng);
        const Matrix r = oracle::randn(2, 2, rng, 5.0);
        g.d_covs[q] = r + r.transpose();
      }
      apply_step(s, g, opt, DynamicsMode::jd_vl, static_cast<std::size_t>(k));
      for (const auto& ld : s.particle_dists) {
        CHECK((ld.cov - ld.cov.transpose()).norm() == 0.0);
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(ld.cov).eigenvalues().minCoeff() > 0.0);
      }
    }
  }
}

TEST_CASE("per-block step sizes") {
  std::mt19937_64 rng(6);
  DatasetState s = labeled(rng);
  const DatasetState before = s;
  OptimizerConfig c;
  c.step_size = 0.1;
  c.mean_step_size = 0.5;
  c.cov_step_size = 0.01;
  OptimizerState opt(c);
  FlowGradients g = FlowGradients::zeros(s, DynamicsMode::jd_fl);
  g.d_features.setOnes();
  for (auto& m : g.d_means) m.setOnes();
  for (auto& m : g.d_covs) m = -Matrix::Identity(2, 2);
  apply_step(s, g, opt, DynamicsMode::jd_fl);
  CHECK((s.features - (before.features.array() - 0.1).matrix()).norm() < 1e-14);
  for (const auto& [y, ld] : s.class_dists) {
    const auto& b = before.class_dists.at(y);
    CHECK((ld.mean - (b.mean.array() - 0.5).matrix()).norm() < 1e-14);
    CHECK((ld.cov - (b.cov + 0.01 * Matrix::Identity(2, 2))).norm() < 1e-12);
  }
}

TEST_CASE("non-finite gradients raise a flow divergence error with the step index") {
  DatasetState s = single_point(0.0, 0.0);
  OptimizerState opt;
  RowMatrix g(1, 2);
  g << std::numeric_limits<double>::quiet_NaN(), 0.0;
  try {
    apply_step(s, feature_grad(g), opt, DynamicsMode::fd, 17);
    FAIL("expected FlowDivergenceError");
  } catch (const FlowDivergenceError& e) {
    CHECK(e.step() == 17);
  }
  g << 1e308, 0.0;
  OptimizerConfig c;
  c.step_size = 1e10;
  OptimizerState big(c);
  CHECK_THROWS_AS(apply_step(s, feature_grad(-g), big, DynamicsMode::fd, 3), FlowDivergenceError);
}

TEST_CASE("validate_optimizer rejects bad hyperparameters") {
  OptimizerConfig c;
  CHECK_NOTHROW(validate_optimizer(c));
  c.step_size = 0.0;
  CHECK_THROWS_AS(validate_optimizer(c), ConfigError);
  c = {};
  c.momentum = 1.0;
  CHECK_THROWS_AS(validate_optimizer(c), ConfigError);
  c = {};
  c.beta2 = -0.1;
  CHECK_THROWS_AS(validate_optimizer(c), ConfigError);
  c = {};
  c.adam_eps = 0.0;
  CHECK_THROWS_AS(validate_optimizer(c), ConfigError);
}
