#pragma once

// Particle discretization of Wasserstein gradient flows: explicit Euler steps
// on features (and, in the joint modes, on label distributions), with
// Euler-Maruyama diffusion for entropy terms and optional gradient noise.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dsflow/clustering.hpp"
#include "dsflow/functionals.hpp"
#include "dsflow/optim.hpp"

namespace dsflow {

enum class NoiseSchedule {
  inverse_sqrt,  // beta_t = beta_0 / sqrt(t + 1)
  constant,
};

enum class NoiseMode {
  evaluation_point,  // gradient evaluated at Z + beta_t U, applied to Z
  state,             // Z += beta_t U, then a plain gradient step
};

enum class ClusterMethod { dbscan, kmeans };

struct ClusteringConfig {
  ClusterMethod method = ClusterMethod::dbscan;
  double eps = kDefaultDbscanEps;
  int min_pts = kDefaultDbscanMinPts;
  int k = 0;  // k-means only
};

struct FlowConfig {
  DynamicsMode mode = DynamicsMode::fd;
  FunctionalSpec functional;
  OptimizerConfig optimizer;
  std::size_t steps = 100;
  double noise_scale = 0.0;
  NoiseSchedule noise_schedule = NoiseSchedule::inverse_sqrt;
  NoiseMode noise_mode = NoiseMode::evaluation_point;
  std::size_t relabel_every = 10;  // jd-vl; 0 relabels only at the end
  ClusteringConfig clustering;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;
};

// Throws ConfigError for invalid settings.
void validate_flow_config(const FlowConfig& config, const DatasetState& initial);

double noise_at(const FlowConfig& config, std::size_t step);

struct Snapshot {
  std::size_t step = 0;
  DatasetState state;
  double objective = 0.0;
  std::vector<double> term_values;
  double wall_time = 0.0;  // seconds since the flow started
};

struct Trajectory {
  std::vector<std::string> term_names;
  DynamicsMode mode = DynamicsMode::fd;
  std::vector<Snapshot> snapshots;
};

struct StepInfo {
  double objective = 0.0;  // value at the gradient evaluation point
  std::vector<double> term_values;
  double gradient_norm = 0.0;
};

// Mutable per-flow state threaded through flow_step.
struct FlowContext {
  explicit FlowContext(const FlowConfig& config)
      : optimizer(config.optimizer), rng(config.seed) {}
  OptimizerState optimizer;
  std::mt19937_64 rng;
  FunctionalWorkspace workspace;
  std::size_t step = 0;  // steps completed
};

// Advances `state` by one step. In fd mode the class statistics are refreshed
// afterwards; in jd-vl mode the particles are relabeled when due (and never
// on the last step, which run_flow handles).
StepInfo flow_step(DatasetState& state, const FlowConfig& config, FlowContext& ctx);

// Replaces labels with a clustering of the per-particle distributions. Noise
// points keep their previous label. Class statistics are recomputed from the
// new labels; the per-particle distributions are left untouched.
void relabel(DatasetState& state, const ClusteringConfig& cfg, std::uint64_t seed);

// Fixes any unresolved regularization in target-distance terms at its value
// for `initial` so that it stays constant along the flow.
void resolve_regularization(FlowConfig& config, const DatasetState& initial);

using SnapshotCallback = std::function<void(const Snapshot&)>;

// Runs config.steps steps from `initial` (decoupled first in jd-vl mode).
// Snapshots hold the initial state, every record_every-th step and the final
// state. On failure the FlowDivergenceError carries the partial trajectory.
Trajectory run_flow(const DatasetState& initial, FlowConfig config,
                    const SnapshotCallback& on_snapshot = {});

}  // namespace dsflow
