#include "dsflow/run.hpp"

#include <cstdlib>

#include "dsflow/error.hpp"
#include "dsflow/simd/kernels.hpp"
#include "dsflow/svg.hpp"
#include "json.hpp"

namespace dsflow {
namespace {

using Json = nlohmann::ordered_json;

const Term* first_target_term(const FlowConfig& flow) {
  for (const Term& t : flow.functional.terms) {
    if (t.kind == TermKind::target_distance) return &t;
  }
  return nullptr;
}

void write_summary(const std::filesystem::path& dir, const std::string& status, const std::string& message,
                   const Trajectory& traj, const FlowConfig& flow, const DatasetState* target) {
  Json j = Json::object();
  j["status"] = status;
  if (!message.empty()) j["message"] = message;
  j["mode"] = std::string(mode_name(flow.mode));
  j["steps"] = flow.steps;
  j["snapshots"] = traj.snapshots.size();
  j["isa"] = std::string(simd::isa_name(simd::kernels().isa));
  j["terms"] = traj.term_names;
  if (!traj.snapshots.empty()) {
    j["initial_objective"] = traj.snapshots.front().objective;
    j["final_objective"] = traj.snapshots.back().objective;
    j["final_step"] = traj.snapshots.back().step;
  }
  if (const Term* t = first_target_term(flow); t && target) {
    j["reg"] = t->otdd.reg;
    if (!traj.snapshots.empty() && status == "ok") {
      const OtddResult r = otdd(traj.snapshots.back().state, *target, t->otdd);
      j["final_otdd"] = r.value;
    }
  }
  write_text_file(dir / "summary.json", j.dump(2) + "\n");
}

}  // namespace

std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv("DSFLOW_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

LoadedRun prepare_run(const RunConfig& cfg) {
  LoadedRun r;
  r.flow = cfg.flow;
  const bool needs_target = r.flow.functional.has_target_distance();
  if (needs_target && !cfg.target) {
    throw ConfigError("functional has a target-distance term but no target dataset is given");
  }
  if (!needs_target && cfg.target) {
    throw ConfigError("a target dataset is given but the functional has no target-distance term");
  }
  r.source = load_source(cfg.source);
  if (cfg.target) {
    r.target = std::make_shared<const DatasetState>(load_source(*cfg.target));
    if (r.target->dim() != r.source.dim()) {
      throw DimensionError("source has dimension " + std::to_string(r.source.dim()) + " but target has " +
                           std::to_string(r.target->dim()));
    }
    for (Term& t : r.flow.functional.terms) {
      if (t.kind == TermKind::target_distance) t.target = r.target;
    }
  }
  if (cfg.plot.enabled && r.source.dim() > 3 && !cfg.plot.axes) {
    throw ConfigError("plot needs 'axes' for " + std::to_string(r.source.dim()) + "-dimensional features");
  }
  resolve_regularization(r.flow, r.source);
  validate_flow_config(r.flow, r.source);
  return r;
}

RunResult run(const RunConfig& cfg) {
  LoadedRun loaded = prepare_run(cfg);
  RunResult result;
  result.output_dir = resolve_output_dir(cfg);
  std::error_code ec;
  std::filesystem::create_directories(result.output_dir, ec);
  if (ec) throw IoError("cannot create '" + result.output_dir.string() + "': " + ec.message());

  save_csv(loaded.source, result.output_dir / "source.csv");
  if (loaded.target) save_csv(*loaded.target, result.output_dir / "target.csv");

  result.trajectory = result.output_dir / "trajectory.jsonl";
  TrajectoryWriter writer(result.trajectory);
  Trajectory meta;
  meta.term_names = loaded.flow.functional.term_names();
  meta.mode = loaded.flow.mode;

  Trajectory traj;
  try {
    traj = run_flow(loaded.source, loaded.flow, [&](const Snapshot& s) { writer.write(s, meta); });
  } catch (const FlowDivergenceError& e) {
    const Trajectory partial = e.partial ? *e.partial : meta;
    write_summary(result.output_dir, "diverged", e.what(), partial, loaded.flow, loaded.target.get());
    throw;
  }
  write_summary(result.output_dir, "ok", "", traj, loaded.flow, loaded.target.get());

  result.snapshots = traj.snapshots.size();
  if (!traj.snapshots.empty()) {
    result.initial_objective = traj.snapshots.front().objective;
    result.final_objective = traj.snapshots.back().objective;
  }
  if (cfg.plot.enabled) {
    const DatasetState* target = cfg.plot.show_target ? loaded.target.get() : nullptr;
    result.frames = export_frames(traj, cfg.plot, target, result.output_dir / "frames").size();
  }
  return result;
}

}  // namespace dsflow
