#include "dsflow/dynamics.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <string>

#include "dsflow/error.hpp"

namespace dsflow {
namespace {

RowMatrix gaussian_noise(Eigen::Index rows, Eigen::Index cols, double scale,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix z(rows, cols);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = scale * normal(rng);
  return z;
}

double norm_of(const FlowGradients& g) {
  double s = g.d_features.squaredNorm();
  for (const auto& m : g.d_means) s += m.squaredNorm();
  for (const auto& c : g.d_covs) s += c.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

void validate_flow_config(const FlowConfig& c, const DatasetState& initial) {
  if (c.steps < 1) throw ConfigError("steps must be at least 1");
  if (c.record_every < 1) throw ConfigError("record_every must be at least 1");
  if (!(c.noise_scale >= 0.0) || !std::isfinite(c.noise_scale)) {
    throw ConfigError("noise_scale must be finite and nonnegative");
  }
  validate_optimizer(c.optimizer);
  validate_spec(c.functional, initial.dim());
  if (c.mode == DynamicsMode::jd_vl) {
    if (c.clustering.method == ClusterMethod::kmeans &&
        (c.clustering.k < 1 || c.clustering.k > initial.size())) {
      throw ConfigError("clustering.k must be in [1, n] for k-means relabeling");
    }
    if (c.clustering.method == ClusterMethod::dbscan &&
        (!(c.clustering.eps >= 0.0) || c.clustering.min_pts < 1)) {
      throw ConfigError("dbscan needs eps >= 0 and min_pts >= 1");
    }
  }
}

double noise_at(const FlowConfig& c, std::size_t step) {
  if (c.noise_scale == 0.0) return 0.0;
  if (c.noise_schedule == NoiseSchedule::constant) return c.noise_scale;
  return c.noise_scale / std::sqrt(static_cast<double>(step) + 1.0);
}

void relabel(DatasetState& state, const ClusteringConfig& cfg, std::uint64_t seed) {
  if (!state.per_particle()) throw DimensionError("relabel: state has no per-particle distributions");
  const ClusterAssignment a = cfg.method == ClusterMethod::dbscan
                                  ? dbscan_bures(state.particle_dists, cfg.eps, cfg.min_pts)
                                  : kmeans_embedded(state.particle_dists, cfg.k, seed);
  for (std::size_t i = 0; i < state.labels.size(); ++i) {
    if (a.labels[i] >= 0) state.labels[i] = a.labels[i];
  }
  state.class_dists.clear();
  refresh_label_stats(state);
}

void resolve_regularization(FlowConfig& config, const DatasetState& initial) {
  for (Term& t : config.functional.terms) {
    if (t.kind == TermKind::target_distance && t.target && !(t.otdd.reg > 0.0)) {
      t.otdd.reg = default_reg(initial, *t.target);
    }
  }
}

StepInfo flow_step(DatasetState& state, const FlowConfig& config, FlowContext& ctx) {
  const std::size_t step = ctx.step;
  const double entropy = config.functional.entropy_weight();
  if (entropy > 0.0) {
    const double scale = std::sqrt(2.0 * config.optimizer.step_size * entropy);
    state.features += gaussian_noise(state.size(), state.dim(), scale, ctx.rng);
  }

  const double beta = noise_at(config, step);
  FunctionalValue fv;
  if (beta > 0.0 && config.noise_mode == NoiseMode::evaluation_point) {
    DatasetState probe = state;
    probe.features += gaussian_noise(state.size(), state.dim(), beta, ctx.rng);
    fv = grad_functional(probe, config.functional, config.mode, &ctx.workspace);
  } else {
    if (beta > 0.0) state.features += gaussian_noise(state.size(), state.dim(), beta, ctx.rng);
    fv = grad_functional(state, config.functional, config.mode, &ctx.workspace);
  }
  if (!std::isfinite(fv.value)) throw FlowDivergenceError("objective is not finite", step + 1);

  apply_step(state, fv.grads, ctx.optimizer, config.mode, step + 1);
  if (config.mode == DynamicsMode::fd) refresh_label_stats(state);
  ctx.step = step + 1;
  if (config.mode == DynamicsMode::jd_vl && config.relabel_every > 0 &&
      ctx.step % config.relabel_every == 0 && ctx.step < config.steps) {
    relabel(state, config.clustering, config.seed + ctx.step);
  }

  StepInfo info;
  info.objective = fv.value;
  info.term_values = std::move(fv.term_values);
  info.gradient_norm = norm_of(fv.grads);
  return info;
}

Trajectory run_flow(const DatasetState& initial, FlowConfig config,
                    const SnapshotCallback& on_snapshot) {
  resolve_regularization(config, initial);
  validate_flow_config(config, initial);

  DatasetState state = initial;
  if (config.mode == DynamicsMode::jd_vl) {
    if (!state.per_particle()) decouple(state);
  } else {
    state.particle_dists.clear();
    if (config.mode == DynamicsMode::fd) refresh_label_stats(state);
  }
  validate_state(state, config.mode);

  FlowContext ctx(config);
  Trajectory traj;
  traj.term_names = config.functional.term_names();
  traj.mode = config.mode;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const bool noisy = config.functional.entropy_weight() > 0.0 || config.noise_scale > 0.0;

  // Without noise the objective of a recorded state is the value computed by
  // the next step's gradient evaluation, so the snapshot waits for it.
  std::optional<Snapshot> pending;
  auto emit = [&](Snapshot&& s) {
    traj.snapshots.push_back(std::move(s));
    if (on_snapshot) on_snapshot(traj.snapshots.back());
  };
  auto clean_snapshot = [&](std::size_t step) {
    Snapshot s{step, state, 0.0, {}, elapsed()};
    const FunctionalValue fv = grad_functional(state, config.functional, config.mode, &ctx.workspace);
    s.objective = fv.value;
    s.term_values = fv.term_values;
    return s;
  };
  auto fail = [&](const std::string& what, std::size_t step) {
    FlowDivergenceError err(what, step);
    err.partial = std::make_shared<Trajectory>(traj);
    return err;
  };

  try {
    if (noisy) {
      emit(clean_snapshot(0));
    } else {
      pending = Snapshot{0, state, 0.0, {}, elapsed()};
    }
    for (std::size_t t = 1; t <= config.steps; ++t) {
      const StepInfo info = flow_step(state, config, ctx);
      if (pending) {
        pending->objective = info.objective;
        pending->term_values = info.term_values;
        emit(std::move(*pending));
        pending.reset();
      }
      const bool last = t == config.steps;
      if (last && config.mode == DynamicsMode::jd_vl) {
        relabel(state, config.clustering, config.seed + t);
      }
      if (last || noisy) {
        if (last || t % config.record_every == 0) emit(clean_snapshot(t));
      } else if (t % config.record_every == 0) {
        pending = Snapshot{t, state, 0.0, {}, elapsed()};
      }
      if (!state.features.allFinite()) throw FlowDivergenceError("state became non-finite", t);
    }
  } catch (FlowDivergenceError& e) {
    if (!e.partial) e.partial = std::make_shared<Trajectory>(traj);
    throw;
  } catch (const ConvergenceError& e) {
    throw fail(std::string("transport solver failed: ") + e.what(), ctx.step + 1);
  } catch (const NumericInputError& e) {
    throw fail(std::string("numerical failure: ") + e.what(), ctx.step + 1);
  } catch (const ConditioningError& e) {
    throw fail(std::string("ill-conditioned covariance: ") + e.what(), ctx.step + 1);
  }
  return traj;
}

}  // namespace dsflow
