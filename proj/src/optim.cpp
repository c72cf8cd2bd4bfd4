#include "dsflow/optim.hpp"

#include <cmath>
#include <string>

#include "dsflow/error.hpp"
#include "dsflow/simd/kernels.hpp"

namespace dsflow {
namespace {

void update_block(double* x, const double* g, std::size_t n, double step, BlockState& b,
                  const OptimizerConfig& cfg, std::size_t t) {
  const auto& k = simd::kernels();
  switch (cfg.rule) {
    case OptimizerRule::sgd:
      k.sgd(x, g, step, n);
      return;
    case OptimizerRule::momentum:
      b.first.resize(n, 0.0);
      k.momentum(x, b.first.data(), g, step, cfg.momentum, n);
      return;
    case OptimizerRule::adam: {
      b.first.resize(n, 0.0);
      b.second.resize(n, 0.0);
      const double td = static_cast<double>(t);
      const simd::AdamStep p{step, cfg.beta1, cfg.beta2, cfg.adam_eps,
                             1.0 - std::pow(cfg.beta1, td), 1.0 - std::pow(cfg.beta2, td)};
      k.adam(x, b.first.data(), b.second.data(), g, p, n);
      return;
    }
    case OptimizerRule::adagrad:
      b.first.resize(n, 0.0);
      k.adagrad(x, b.first.data(), g, step, cfg.adagrad_eps, n);
      return;
  }
}

template <class Get>
std::vector<double> gather(std::size_t blocks, std::size_t width, Get&& get) {
  std::vector<double> flat(blocks * width);
  for (std::size_t k = 0; k < blocks; ++k) {
    const auto& v = get(k);
    std::copy(v.data(), v.data() + width, flat.data() + k * width);
  }
  return flat;
}

}  // namespace

std::string_view rule_name(OptimizerRule r) {
  switch (r) {
    case OptimizerRule::sgd:
      return "sgd";
    case OptimizerRule::momentum:
      return "momentum";
    case OptimizerRule::adam:
      return "adam";
    case OptimizerRule::adagrad:
      return "adagrad";
  }
  return "sgd";
}

OptimizerRule parse_rule(std::string_view name) {
  for (auto r : {OptimizerRule::sgd, OptimizerRule::momentum, OptimizerRule::adam,
                 OptimizerRule::adagrad}) {
    if (rule_name(r) == name) return r;
  }
  throw ConfigError("unknown optimizer rule '" + std::string(name) + "'");
}

void validate_optimizer(const OptimizerConfig& c) {
  if (!(c.step_size > 0.0) || !std::isfinite(c.step_size)) {
    throw ConfigError("optimizer step_size must be positive");
  }
  if (!std::isfinite(c.mean_step_size) || !std::isfinite(c.cov_step_size)) {
    throw ConfigError("optimizer block step sizes must be finite");
  }
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (!(c.adam_eps > 0.0) || !(c.adagrad_eps > 0.0)) {
    throw ConfigError("optimizer eps must be positive");
  }
}

void apply_step(DatasetState& state, const FlowGradients& grads, OptimizerState& opt,
                DynamicsMode mode, std::size_t step_index) {
  if (!grads.all_finite()) throw FlowDivergenceError("non-finite gradient", step_index);
  if (grads.d_features.rows() != state.size() || grads.d_features.cols() != state.dim()) {
    throw DimensionError("apply_step: feature gradient shape mismatch");
  }
  const OptimizerConfig& cfg = opt.config;
  const std::size_t t = ++opt.step_count;
  update_block(state.features.data(), grads.d_features.data(),
               static_cast<std::size_t>(state.features.size()), cfg.step_size, opt.features, cfg, t);
  if (!state.features.allFinite()) throw FlowDivergenceError("features became non-finite", step_index);
  if (mode == DynamicsMode::fd || grads.d_means.empty()) return;

  std::vector<LabelDistribution*> dists;
  if (mode == DynamicsMode::jd_fl) {
    for (auto& [y, ld] : state.class_dists) dists.push_back(&ld);
  } else {
    for (auto& ld : state.particle_dists) dists.push_back(&ld);
  }
  if (dists.size() != grads.d_means.size() || dists.size() != grads.d_covs.size()) {
    throw DimensionError("apply_step: label gradient blocks do not match the state");
  }
  const auto d = static_cast<std::size_t>(state.dim());
  const std::size_t blocks = dists.size();
  const double mean_step = cfg.mean_step_size > 0.0 ? cfg.mean_step_size : cfg.step_size;
  const double cov_step = cfg.cov_step_size > 0.0 ? cfg.cov_step_size : cfg.step_size;

  auto means = gather(blocks, d, [&](std::size_t k) -> const Vector& { return dists[k]->mean; });
  const auto gm = gather(blocks, d, [&](std::size_t k) -> const Vector& { return grads.d_means[k]; });
  update_block(means.data(), gm.data(), means.size(), mean_step, opt.means, cfg, t);

  auto covs = gather(blocks, d * d, [&](std::size_t k) -> const Matrix& { return dists[k]->cov; });
  const auto gc =
      gather(blocks, d * d, [&](std::size_t k) -> const Matrix& { return grads.d_covs[k]; });
  update_block(covs.data(), gc.data(), covs.size(), cov_step, opt.covs, cfg, t);

  const auto dd = static_cast<Eigen::Index>(d);
  for (std::size_t k = 0; k < blocks; ++k) {
    LabelDistribution& ld = *dists[k];
    ld.mean = Eigen::Map<const Vector>(means.data() + k * d, dd);
    const Matrix c = Eigen::Map<const Matrix>(covs.data() + k * d * d, dd, dd);
    if (!ld.mean.allFinite() || !c.allFinite()) {
      throw FlowDivergenceError("label distribution became non-finite", step_index);
    }
    const Matrix sym = 0.5 * (c + c.transpose());
    ld.cov = project_psd(sym, psd_floor(sym));
  }
}

}  // namespace dsflow
