#pragma once

// Run configuration: a single JSON document whose keys mirror the flow and
// dataset settings.

#include <filesystem>
#include <optional>
#include <string>

#include "dsflow/dynamics.hpp"
#include "dsflow/io.hpp"
#include "dsflow/synthetic.hpp"

namespace dsflow {

struct DatasetSource {
  std::optional<GeneratorSpec> generator;
  std::filesystem::path path;         // csv file, or idx images
  std::filesystem::path labels_path;  // idx labels
  std::string format = "csv";         // "csv" or "idx"
  IdxOptions idx;
};

struct PlotOptions {
  bool enabled = true;
  std::size_t frame_stride = 10;
  std::optional<std::pair<int, int>> axes;  // required when dim > 3
  bool show_target = true;
  int width = 480;
  int height = 480;
  double point_radius = 2.5;
};

struct ConvexityOptions {
  double lambda = 0.0;
  bool generalized = false;  // use the target as base point
};

struct RunConfig {
  DatasetSource source;
  std::optional<DatasetSource> target;
  FlowConfig flow;  // target-distance terms get their target when the run loads it
  std::filesystem::path output_dir = "dsflow_out";
  PlotOptions plot;
  ConvexityOptions convexity;
};

// Throws ConfigError on unknown keys, wrong types or invalid values. Relative
// paths are resolved against base_dir.
RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

DatasetState load_source(const DatasetSource& src);

}  // namespace dsflow
