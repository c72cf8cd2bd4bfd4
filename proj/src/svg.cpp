#include "dsflow/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dsflow/error.hpp"

namespace dsflow {
namespace {

constexpr std::array<const char*, 10> kPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#bcbd22", "#17becf", "#393b79",
};

std::string fixed(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::pair<int, int> plot_axes(Eigen::Index dim, const PlotOptions& opts) {
  if (opts.axes) {
    const auto [i, j] = *opts.axes;
    if (i >= dim || j >= dim) throw DimensionError("plot axes out of range for dimension " + std::to_string(dim));
    return *opts.axes;
  }
  if (dim > 3) {
    throw DimensionError("plotting " + std::to_string(dim) + "-dimensional features needs an explicit axis pair");
  }
  return {0, dim >= 2 ? 1 : 0};
}

void extend(PlotBounds& b, const DatasetState& s, std::pair<int, int> axes) {
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double x = s.features(i, axes.first);
    const double y = s.features(i, axes.second);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    b.x0 = std::min(b.x0, x);
    b.x1 = std::max(b.x1, x);
    b.y0 = std::min(b.y0, y);
    b.y1 = std::max(b.y1, y);
  }
}

PlotBounds padded(PlotBounds b) {
  if (!(b.x0 <= b.x1)) b = {-1.0, 1.0, -1.0, 1.0};
  auto widen = [](double& lo, double& hi) {
    const double span = hi - lo;
    const double pad = span > 0.0 ? 0.05 * span : 1.0;
    lo -= pad;
    hi += pad;
  };
  widen(b.x0, b.x1);
  widen(b.y0, b.y1);
  return b;
}

void scatter(std::string& out, const DatasetState& s, std::pair<int, int> axes, const PlotOptions& opts,
             const PlotBounds& b, bool target) {
  const double w = opts.width;
  const double h = opts.height;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double px = (s.features(i, axes.first) - b.x0) / (b.x1 - b.x0) * w;
    const double py = h - (s.features(i, axes.second) - b.y0) / (b.y1 - b.y0) * h;
    if (!std::isfinite(px) || !std::isfinite(py)) continue;
    const std::string color = target ? kTargetColor : label_color(s.labels[static_cast<std::size_t>(i)]);
    out += "<circle cx=\"" + fixed(px) + "\" cy=\"" + fixed(py) + "\" r=\"" + fixed(opts.point_radius) +
           "\" fill=\"" + color + "\"" + (target ? " fill-opacity=\"0.5\"" : "") + "/>\n";
  }
}

}  // namespace

std::string label_color(int label) {
  if (label >= 0 && label < static_cast<int>(kPalette.size())) return kPalette[static_cast<std::size_t>(label)];
  // Golden-angle hues at fixed saturation and lightness, never gray.
  const double hue = std::fmod(137.508 * static_cast<double>(label < 0 ? -label : label), 360.0);
  return "hsl(" + fixed(hue, 1) + ",65%,45%)";
}

std::string render_svg(const DatasetState& state, const DatasetState* target, const PlotOptions& opts,
                       const PlotBounds& bounds, const std::string& title) {
  const auto axes = plot_axes(state.dim(), opts);
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opts.width) + "\" height=\"" +
         std::to_string(opts.height) + "\" viewBox=\"0 0 " + std::to_string(opts.width) + " " +
         std::to_string(opts.height) + "\">\n";
  out += "<title>" + escape(title) + "</title>\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (target) {
    if (target->dim() != state.dim()) throw DimensionError("plot target dimension differs from the flow");
    scatter(out, *target, axes, opts, bounds, true);
  }
  scatter(out, state, axes, opts, bounds, false);
  out += "<text x=\"6\" y=\"16\" font-family=\"monospace\" font-size=\"12\">" + escape(title) + "</text>\n";
  out += "</svg>\n";
  return out;
}

std::vector<std::filesystem::path> export_frames(const Trajectory& traj, const PlotOptions& opts,
                                                 const DatasetState* target,
                                                 const std::filesystem::path& dir) {
  if (opts.frame_stride < 1) throw ConfigError("frame stride must be at least 1");
  std::vector<std::filesystem::path> paths;
  if (traj.snapshots.empty()) return paths;
  const auto axes = plot_axes(traj.snapshots.front().state.dim(), opts);

  PlotBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < traj.snapshots.size(); k += opts.frame_stride) {
    extend(b, traj.snapshots[k].state, axes);
  }
  if (target) extend(b, *target, axes);
  b = padded(b);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  for (std::size_t k = 0; k < traj.snapshots.size(); k += opts.frame_stride) {
    const Snapshot& s = traj.snapshots[k];
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.svg", paths.size());
    const std::string title = "step " + std::to_string(s.step) + "  F = " + fixed(s.objective, 6);
    const auto path = dir / name;
    write_text_file(path, render_svg(s.state, target, opts, b, title));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace dsflow
