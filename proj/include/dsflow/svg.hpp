#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dsflow/config.hpp"

namespace dsflow {

// Fill color of a class id; never the target color.
std::string label_color(int label);
inline constexpr const char* kTargetColor = "#a0a0a0";

struct PlotBounds {
  double x0, x1, y0, y1;
};

// One scatter plot of `state` (and `target` in gray underneath when given).
std::string render_svg(const DatasetState& state, const DatasetState* target,
                       const PlotOptions& opts, const PlotBounds& bounds, const std::string& title);

// Writes frame_NNNN.svg for snapshots 0, stride, 2 stride, ... into dir and
// returns the paths: ceil(snapshots / stride) files. Throws DimensionError for
// dim > 3 without an explicit axis pair.
std::vector<std::filesystem::path> export_frames(const Trajectory& traj, const PlotOptions& opts,
                                                 const DatasetState* target,
                                                 const std::filesystem::path& dir);

}  // namespace dsflow
