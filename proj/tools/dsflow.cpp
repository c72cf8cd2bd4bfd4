#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsflow/diagnostics.hpp"
#include "dsflow/error.hpp"
#include "dsflow/run.hpp"
#include "dsflow/svg.hpp"
#include "json.hpp"

namespace {

using Json = nlohmann::ordered_json;

int cmd_run(const std::string& config_path) {
  const dsflow::RunConfig cfg = dsflow::load_run_config(config_path);
  const dsflow::RunResult r = dsflow::run(cfg);
  std::cout << "wrote " << r.snapshots << " snapshots to " << r.trajectory.string() << "\n"
            << "objective " << r.initial_objective << " -> " << r.final_objective << "\n";
  if (r.frames > 0) std::cout << r.frames << " frames in " << (r.output_dir / "frames").string() << "\n";
  return 0;
}

int cmd_distance(const std::string& src, const std::string& dst, double reg, bool biased) {
  const dsflow::DatasetState a = dsflow::load_csv(src);
  const dsflow::DatasetState b = dsflow::load_csv(dst);
  dsflow::OtddOptions opts;
  opts.reg = reg;
  opts.debiased = !biased;
  const dsflow::OtddResult r = dsflow::otdd(a, b, opts);
  Json j = Json::object();
  j["otdd"] = r.value;
  j["divergence"] = r.divergence;
  j["reg"] = r.reg;
  j["debiased"] = r.debiased;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_check_convexity(const std::string& config_path, const std::string& other_path) {
  const dsflow::RunConfig cfg = dsflow::load_run_config(config_path);
  const dsflow::LoadedRun loaded = dsflow::prepare_run(cfg);
  dsflow::DatasetState other;
  if (!other_path.empty()) {
    other = dsflow::load_csv(other_path);
  } else if (loaded.target) {
    other = *loaded.target;
  } else {
    throw dsflow::ConfigError("check-convexity needs a second dataset: a target in the config or --other");
  }
  const dsflow::DatasetState* base = nullptr;
  if (cfg.convexity.generalized) {
    if (!loaded.target) throw dsflow::ConfigError("generalized geodesics use the target as base point");
    base = loaded.target.get();
  }
  const dsflow::ConvexityReport r = dsflow::check_displacement_convexity(
      loaded.flow.functional, loaded.source, other, cfg.convexity.lambda, base);

  Json j = Json::object();
  j["functional"] = r.functional;
  j["lambda"] = r.lambda_claimed;
  j["w2_sq"] = r.w2_sq;
  j["max_violation"] = r.max_violation;
  Json samples = Json::array();
  for (const auto& s : r.samples) samples.push_back({{"t", s.t}, {"lhs", s.lhs}, {"rhs", s.rhs}});
  j["samples"] = std::move(samples);

  const auto dir = dsflow::resolve_output_dir(cfg);
  std::filesystem::create_directories(dir);
  dsflow::write_text_file(dir / "convexity.json", j.dump(2) + "\n");
  std::cout << "max violation " << r.max_violation << " (lambda " << r.lambda_claimed << ")\n";
  return 0;
}

int cmd_plot(const std::string& trajectory, std::size_t stride, const std::string& target_path,
             const std::vector<int>& axes, const std::string& out) {
  const dsflow::Trajectory traj = dsflow::read_trajectory(trajectory);
  dsflow::PlotOptions opts;
  opts.frame_stride = stride;
  if (!axes.empty()) {
    if (axes.size() != 2) throw dsflow::ConfigError("--axes takes two feature indices");
    opts.axes = std::make_pair(axes[0], axes[1]);
  }
  dsflow::DatasetState target;
  if (!target_path.empty()) target = dsflow::load_csv(target_path);
  const std::filesystem::path dir =
      out.empty() ? std::filesystem::path(trajectory).parent_path() / "frames" : std::filesystem::path(out);
  const auto paths = dsflow::export_frames(traj, opts, target_path.empty() ? nullptr : &target, dir);
  std::cout << paths.size() << " frames in " << dir.string() << "\n";
  return 0;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const dsflow::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const dsflow::FlowDivergenceError*>(&e) || dynamic_cast<const dsflow::ConvergenceError*>(&e) ||
      dynamic_cast<const dsflow::NumericInputError*>(&e) || dynamic_cast<const dsflow::ConditioningError*>(&e) ||
      dynamic_cast<const dsflow::DegenerateClassError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const dsflow::IoError*>(&e) || dynamic_cast<const dsflow::ParseError*>(&e)) return 4;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dataset optimization by Wasserstein gradient flows"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run a flow described by a JSON config");
  run->add_option("config", config_path, "Run config")->required();

  std::string src;
  std::string dst;
  double reg = 0.0;
  bool biased = false;
  auto* distance = app.add_subcommand("distance", "Dataset distance between two CSV datasets");
  distance->add_option("src", src, "Source CSV")->required();
  distance->add_option("dst", dst, "Target CSV")->required();
  distance->add_option("--reg", reg, "Entropic regularization (default: 5% of the mean ground cost)");
  distance->add_flag("--biased", biased, "Skip the self-transport correction");

  std::string other;
  auto* convexity = app.add_subcommand("check-convexity", "Check lambda-convexity along a geodesic");
  convexity->add_option("config", config_path, "Run config")->required();
  convexity->add_option("--other", other, "Endpoint CSV (default: the config target)");

  std::string trajectory;
  std::size_t stride = 10;
  std::string target_path;
  std::vector<int> axes;
  std::string out;
  auto* plot = app.add_subcommand("plot", "Render SVG frames from a trajectory");
  plot->add_option("trajectory", trajectory, "trajectory.jsonl")->required();
  plot->add_option("--stride", stride, "Snapshots per frame")->check(CLI::PositiveNumber);
  plot->add_option("--target", target_path, "Target CSV drawn underneath");
  plot->add_option("--axes", axes, "Feature axis pair")->expected(2)->delimiter(',');
  plot->add_option("--out", out, "Frame directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*distance) return cmd_distance(src, dst, reg, biased);
    if (*convexity) return cmd_check_convexity(config_path, other);
    if (*plot) return cmd_plot(trajectory, stride, target_path, axes, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dsflow: %s\n", e.what());
    return exit_code(e);
  }
  return 1;
}
