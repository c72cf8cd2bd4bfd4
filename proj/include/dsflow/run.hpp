#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "dsflow/config.hpp"

namespace dsflow {

struct RunResult {
  std::filesystem::path output_dir;
  std::filesystem::path trajectory;
  std::size_t snapshots = 0;
  std::size_t frames = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

// Output directory after the DSFLOW_OUTPUT_DIR override.
std::filesystem::path resolve_output_dir(const RunConfig& cfg);

// Loads the datasets, validates everything, runs the flow and writes
// trajectory.jsonl, summary.json, source.csv / target.csv and SVG frames.
// On divergence the summary records the failure and the error is rethrown.
RunResult run(const RunConfig& cfg);

// Loads source and target and wires the target into target-distance terms.
// Throws ConfigError when a target is required but missing, or vice versa.
struct LoadedRun {
  DatasetState source;
  std::shared_ptr<const DatasetState> target;
  FlowConfig flow;
};
LoadedRun prepare_run(const RunConfig& cfg);

}  // namespace dsflow
