#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>

#include "doctest.h"
#include "dsflow/io.hpp"
#include "dsflow/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

std::string cli() {
  const char* p = std::getenv("DSFLOW_CLI");
  REQUIRE_MESSAGE(p != nullptr, "DSFLOW_CLI is not set");
  return p;
}

// Runs the CLI with `args`, capturing stdout; stderr is discarded.
Outcome invoke(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + cli() + "' " + args + " 2>/dev/null";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  REQUIRE(pipe);
  Outcome o;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe.get())) > 0) o.out.append(buf, got);
  const int status = pclose(pipe.release());
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dsflow_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_datasets(const fs::path& dir) {
  dsflow::GeneratorSpec g;
  g.n = 24;
  g.k = 3;
  g.seed = 1;
  dsflow::save_csv(dsflow::generate(g), dir / "a.csv");
  g.seed = 2;
  g.rotation = 0.4;
  dsflow::save_csv(dsflow::generate(g), dir / "b.csv");
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(invoke("").code == 2);
  CHECK(invoke("fly").code == 2);
  CHECK(invoke("distance only_one.csv").code == 2);
  CHECK(invoke("plot t.jsonl --stride 0").code == 2);
  CHECK(invoke("--help").code == 0);
}

TEST_CASE("run writes artifacts and exits with 0") {
  const fs::path dir = scratch("run");
  write_datasets(dir);
  dsflow::write_text_file(dir / "cfg.json", R"({
    "source": {"path": "a.csv"},
    "target": {"path": "b.csv"},
    "functional": [{"kind": "target-distance"}],
    "optimizer": {"step_size": 0.5},
    "steps": 4, "output_dir": "out", "plot": {"frame_stride": 2}
  })");
  const Outcome o = invoke("run '" + (dir / "cfg.json").string() + "'");
  CHECK(o.code == 0);
  CHECK(o.out.find("wrote 5 snapshots") != std::string::npos);
  CHECK(dsflow::read_trajectory(dir / "out" / "trajectory.jsonl").snapshots.size() == 5);
  const auto summary = nlohmann::json::parse(dsflow::read_text_file(dir / "out" / "summary.json"));
  CHECK(summary["status"] == "ok");
  CHECK(summary["snapshots"] == 5);
  CHECK(summary["final_objective"].get<double>() <= summary["initial_objective"].get<double>());
  CHECK(fs::exists(dir / "out" / "frames" / "frame_0000.svg"));
  CHECK(fs::exists(dir / "out" / "target.csv"));

  // The environment override redirects every artifact.
  const Outcome moved = invoke("run '" + (dir / "cfg.json").string() + "'",
                               "DSFLOW_OUTPUT_DIR='" + (dir / "moved").string() + "'");
  CHECK(moved.code == 0);
  CHECK(fs::exists(dir / "moved" / "trajectory.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("run failures map to exit codes") {
  const fs::path dir = scratch("fail");
  write_datasets(dir);
  CHECK(invoke("run '" + (dir / "missing.json").string() + "'").code == 4);
  dsflow::write_text_file(dir / "unknown.json", R"({"source": {"path": "a.csv"},
    "functional": [{"kind": "entropy"}], "speed": 3})");
  CHECK(invoke("run '" + (dir / "unknown.json").string() + "'").code == 2);
  dsflow::write_text_file(dir / "notarget.json", R"({"source": {"path": "a.csv"},
    "functional": [{"kind": "target-distance"}]})");
  CHECK(invoke("run '" + (dir / "notarget.json").string() + "'").code == 2);
  dsflow::write_text_file(dir / "nodata.json", R"({"source": {"path": "nothere.csv"},
    "functional": [{"kind": "entropy"}], "output_dir": "o"})");
  CHECK(invoke("run '" + (dir / "nodata.json").string() + "'").code == 4);
  dsflow::write_text_file(dir / "bad.csv", "f0,f1,label\n1,2,0\n3,oops,1\n");
  dsflow::write_text_file(dir / "badcsv.json", R"({"source": {"path": "bad.csv"},
    "functional": [{"kind": "entropy"}], "output_dir": "o"})");
  CHECK(invoke("run '" + (dir / "badcsv.json").string() + "'").code == 4);
  dsflow::write_text_file(dir / "diverge.json", R"({"source": {"path": "a.csv"},
    "functional": [{"kind": "potential", "form": "quadratic", "weight": 1e308}],
    "optimizer": {"step_size": 10}, "steps": 5, "output_dir": "div"})");
  CHECK(invoke("run '" + (dir / "diverge.json").string() + "'").code == 3);
  const auto summary = nlohmann::json::parse(dsflow::read_text_file(dir / "div" / "summary.json"));
  CHECK(summary["status"] == "diverged");
  fs::remove_all(dir);
}

TEST_CASE("distance prints a JSON report") {
  const fs::path dir = scratch("distance");
  write_datasets(dir);
  const std::string a = "'" + (dir / "a.csv").string() + "'";
  const std::string b = "'" + (dir / "b.csv").string() + "'";
  const Outcome o = invoke("distance " + a + " " + b + " --reg 0.5");
  REQUIRE(o.code == 0);
  const auto j = nlohmann::json::parse(o.out);
  CHECK(j["reg"] == 0.5);
  CHECK(j["debiased"] == true);
  CHECK(j["otdd"].get<double>() > 0.0);
  const auto self = nlohmann::json::parse(invoke("distance " + a + " " + a + " --reg 0.5").out);
  CHECK(self["otdd"].get<double>() < 1e-3 * j["otdd"].get<double>() + 1e-6);
  const auto biased = nlohmann::json::parse(invoke("distance " + a + " " + b + " --reg 0.5 --biased").out);
  CHECK(biased["debiased"] == false);
  CHECK(invoke("distance " + a + " '" + (dir / "none.csv").string() + "'").code == 4);
  fs::remove_all(dir);
}

TEST_CASE("check-convexity writes a report") {
  const fs::path dir = scratch("convexity");
  write_datasets(dir);
  dsflow::write_text_file(dir / "cfg.json", R"({
    "source": {"path": "a.csv"},
    "functional": [{"kind": "potential", "form": "quadratic"}],
    "output_dir": "out", "convexity": {"lambda": 1.0}
  })");
  const Outcome o = invoke("check-convexity '" + (dir / "cfg.json").string() + "' --other '" +
                           (dir / "b.csv").string() + "'");
  CHECK(o.code == 0);
  const auto j = nlohmann::json::parse(dsflow::read_text_file(dir / "out" / "convexity.json"));
  CHECK(j["samples"].size() == 11);
  CHECK(j["max_violation"].get<double>() <= 1e-8);
  // Without a target or --other there is no second endpoint.
  CHECK(invoke("check-convexity '" + (dir / "cfg.json").string() + "'").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("plot renders frames from a trajectory") {
  const fs::path dir = scratch("plot");
  write_datasets(dir);
  dsflow::write_text_file(dir / "cfg.json", R"({
    "source": {"path": "a.csv"},
    "functional": [{"kind": "potential", "form": "quadratic"}],
    "steps": 9, "output_dir": "out", "plot": {"enabled": false}
  })");
  REQUIRE(invoke("run '" + (dir / "cfg.json").string() + "'").code == 0);
  const std::string traj = "'" + (dir / "out" / "trajectory.jsonl").string() + "'";
  const Outcome o = invoke("plot " + traj + " --stride 4 --out '" + (dir / "frames").string() + "' --target '" +
                           (dir / "b.csv").string() + "'");
  CHECK(o.code == 0);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir / "frames")) n += e.path().extension() == ".svg";
  CHECK(n == 3);
  CHECK(invoke("plot '" + (dir / "nothing.jsonl").string() + "'").code == 4);
  fs::remove_all(dir);
}
