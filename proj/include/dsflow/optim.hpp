#pragma once

// First-order update rules applied block-wise (features, label means, label
// covariances) to a DatasetState.

#include <cstddef>
#include <string_view>
#include <vector>

#include "dsflow/dataset.hpp"
#include "dsflow/gradients.hpp"

namespace dsflow {

enum class OptimizerRule { sgd, momentum, adam, adagrad };

std::string_view rule_name(OptimizerRule r);
OptimizerRule parse_rule(std::string_view name);

struct OptimizerConfig {
  OptimizerRule rule = OptimizerRule::sgd;
  double step_size = 0.05;
  // Per-block step sizes for the label means and covariances; <= 0 uses step_size.
  double mean_step_size = 0.0;
  double cov_step_size = 0.0;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double adagrad_eps = 1e-10;
};

// Throws ConfigError on non-positive step sizes or out-of-range hyperparameters.
void validate_optimizer(const OptimizerConfig& cfg);

// Accumulators of one parameter block, flattened.
struct BlockState {
  std::vector<double> first;   // momentum buffer, Adam m, Adagrad sum of squares
  std::vector<double> second;  // Adam v
};

struct OptimizerState {
  OptimizerConfig config;
  std::size_t step_count = 0;
  BlockState features;
  BlockState means;
  BlockState covs;

  explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) {}
};

// One update of every block present in `grads`; covariance blocks are
// projected back onto the PSD cone afterwards. Throws FlowDivergenceError
// (carrying `step_index`) on a non-finite gradient or result.
void apply_step(DatasetState& state, const FlowGradients& grads, OptimizerState& opt,
                DynamicsMode mode, std::size_t step_index = 0);

}  // namespace dsflow
