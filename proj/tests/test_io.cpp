#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <regex>
#include <set>
#include <string>

#include "doctest.h"
#include "dsflow/error.hpp"
#include "dsflow/run.hpp"
#include "dsflow/svg.hpp"
#include "support/oracles.hpp"

using namespace dsflow;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory under the system temp path.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dsflow_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void put_be32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

// IDX pair with `count` images of rows x cols; pixel (i, r, c) = (7 i + 3 r + c) mod 256, label i mod 10.
void write_idx(const fs::path& images, const fs::path& labels, std::uint32_t count, std::uint32_t rows,
               std::uint32_t cols) {
  std::string img, lab;
  put_be32(img, 0x803);
  put_be32(img, count);
  put_be32(img, rows);
  put_be32(img, cols);
  put_be32(lab, 0x801);
  put_be32(lab, count);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) img.push_back(static_cast<char>((7 * i + 3 * r + c) % 256));
    }
    lab.push_back(static_cast<char>(i % 10));
  }
  write_text_file(images, img);
  write_text_file(labels, lab);
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

std::string strip_wall_time(const std::string& s) {
  return std::regex_replace(s, std::regex("\"wall_time\":[^,}]*"), "\"wall_time\":0");
}

const char* kMinimal = R"({
  "source": {"generator": {"kind": "gaussian-mixture", "n": 30, "k": 3, "seed": 4}},
  "functional": [{"kind": "potential", "form": "quadratic", "weight": 0.0}],
  "steps": 1,
  "plot": {"frame_stride": 1}
})";

}  // namespace

TEST_CASE("three-row csv") {
  const DatasetState s = parse_csv("f0,f1,label\n1,2,0\n3.5,-4,1\n0,0,1\n");
  CHECK(s.size() == 3);
  CHECK(s.dim() == 2);
  CHECK(s.features(1, 0) == 3.5);
  CHECK(s.features(1, 1) == -4.0);
  CHECK(s.labels == std::vector<int>{0, 1, 1});
  CHECK(s.weights.sum() == doctest::Approx(1.0));
}

TEST_CASE("label column may be anywhere") {
  const DatasetState s = parse_csv("label,a,b\n2,1.5,2.5\n");
  CHECK(s.labels == std::vector<int>{2});
  CHECK(s.features(0, 0) == 1.5);
  CHECK(s.features(0, 1) == 2.5);
}

TEST_CASE("csv errors carry the line number") {
  CHECK_THROWS_AS(parse_csv(""), ParseError);
  CHECK_THROWS_AS(parse_csv("\n\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("f0,f1\n1,2\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("f0,label\n"), ParseError);
  try {
    parse_csv("f0,label\n1,0\n2,0\nx,1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  try {
    parse_csv("f0,label\n1,0\n2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_csv("f0,label\n1,-1\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("f0,label\n1,0.5\n"), ParseError);
  CHECK_THROWS_AS(load_csv("/nonexistent/dsflow.csv"), IoError);
}

TEST_CASE("csv round trip is bit-identical") {
  std::mt19937_64 rng(1);
  const fs::path dir = scratch("csv");
  for (int trial = 0; trial < 20; ++trial) {
    RowMatrix x = oracle::randn(25, 1 + trial % 4, rng, std::pow(10.0, trial % 7 - 3));
    x(0, 0) = 1e-300;
    x(1, 0) = -0.1;
    std::vector<int> y(25);
    for (int i = 0; i < 25; ++i) y[static_cast<std::size_t>(i)] = (i * 7 + trial) % 4;
    const DatasetState s = make_state(x, y);
    save_csv(s, dir / "d.csv");
    const DatasetState back = load_csv(dir / "d.csv");
    CHECK(back.features == s.features);
    CHECK(back.labels == s.labels);
  }
  fs::remove_all(dir);
}

TEST_CASE("idx pair decodes against the header layout") {
  const fs::path dir = scratch("idx");
  write_idx(dir / "img", dir / "lab", 100, 4, 6);
  const DatasetState all = load_idx(dir / "img", dir / "lab");
  REQUIRE(all.size() == 100);
  REQUIRE(all.dim() == 24);
  for (Eigen::Index i = 0; i < 100; i += 13) {
    CHECK(all.labels[static_cast<std::size_t>(i)] == i % 10);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 6; ++c) {
        CHECK(all.features(i, r * 6 + c) == doctest::Approx(((7 * i + 3 * r + c) % 256) / 255.0));
      }
    }
  }
  CHECK(all.features.minCoeff() >= 0.0);
  CHECK(all.features.maxCoeff() <= 1.0);

  IdxOptions capped;
  capped.per_class_cap = 5;
  const DatasetState few = load_idx(dir / "img", dir / "lab", capped);
  CHECK(few.size() <= 50);
  std::map<int, int> per;
  for (int y : few.labels) ++per[y];
  CHECK(per.size() == 10);
  for (const auto& [y, m] : per) {
    CHECK(y >= 0);
    CHECK(y <= 9);
    CHECK(m == 5);
  }

  IdxOptions pooled;
  pooled.downscale = 2;
  const DatasetState small = load_idx(dir / "img", dir / "lab", pooled);
  REQUIRE(small.dim() == 6);
  for (Eigen::Index i = 0; i < 100; i += 17) {
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) {
        double want = 0.0;
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) want += all.features(i, (2 * r + dr) * 6 + 2 * c + dc);
        }
        CHECK(small.features(i, r * 3 + c) == doctest::Approx(want / 4.0));
      }
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("malformed idx files") {
  const fs::path dir = scratch("idx_bad");
  write_idx(dir / "img", dir / "lab", 10, 2, 2);
  write_idx(dir / "img9", dir / "lab9", 9, 2, 2);
  CHECK_THROWS_AS(load_idx(dir / "img", dir / "lab9"), ParseError);
  CHECK_THROWS_AS(load_idx(dir / "lab", dir / "img"), ParseError);
  std::string cut = read_text_file(dir / "img");
  cut.resize(cut.size() - 1);
  write_text_file(dir / "cut", cut);
  CHECK_THROWS_AS(load_idx(dir / "cut", dir / "lab"), ParseError);
  write_text_file(dir / "tiny", std::string("\0\0\x08", 3));
  CHECK_THROWS_AS(load_idx(dir / "tiny", dir / "lab"), ParseError);
  IdxOptions bad;
  bad.downscale = 0;
  CHECK_THROWS_AS(load_idx(dir / "img", dir / "lab", bad), ConfigError);
  CHECK_THROWS_AS(load_idx(dir / "missing", dir / "lab"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("config parsing") {
  const RunConfig c = parse_run_config(R"({
    "source": {"path": "src.csv"},
    "target": {"generator": {"kind": "swiss-roll", "n": 40, "k": 4}},
    "mode": "jd-vl",
    "functional": [{"kind": "target-distance", "reg": 0.2}, {"kind": "entropy", "weight": 0.01}],
    "optimizer": {"rule": "adam", "step_size": 0.05},
    "steps": 7, "seed": 3, "record_every": 2,
    "clustering": {"method": "kmeans", "k": 4},
    "output_dir": "out"
  })",
                                       "/base");
  CHECK(c.source.path == fs::path("/base/src.csv"));
  REQUIRE(c.target.has_value());
  CHECK(c.target->generator->kind == GeneratorKind::swiss_roll);
  CHECK(c.flow.mode == DynamicsMode::jd_vl);
  REQUIRE(c.flow.functional.terms.size() == 2);
  CHECK(c.flow.functional.terms[0].otdd.reg == 0.2);
  CHECK(c.flow.functional.entropy_weight() == 0.01);
  CHECK(c.flow.optimizer.rule == OptimizerRule::adam);
  CHECK(c.flow.steps == 7);
  CHECK(c.flow.record_every == 2);
  CHECK(c.flow.clustering.method == ClusterMethod::kmeans);
  CHECK(c.output_dir == fs::path("/base/out"));
}

TEST_CASE("config errors") {
  auto bad = [](const std::string& text) { CHECK_THROWS_AS(parse_run_config(text), ConfigError); };
  bad("not json");
  bad(R"({"functional": [{"kind": "entropy"}]})");
  bad(R"({"source": {"generator": {}}, "functional": []})");
  bad(R"({"source": {"generator": {}}, "functional": [{"kind": "entropy"}], "colour": 1})");
  bad(R"({"source": {"generator": {"sides": 3}}, "functional": [{"kind": "entropy"}]})");
  bad(R"({"source": {"generator": {}, "path": "x"}, "functional": [{"kind": "entropy"}]})");
  bad(R"({"source": {"generator": {}}, "functional": [{"kind": "gravity"}]})");
  bad(R"({"source": {"generator": {}}, "functional": [{"kind": "entropy"}], "steps": 0})");
  bad(R"({"source": {"generator": {}}, "functional": [{"kind": "entropy"}], "steps": "ten"})");
  bad(R"({"source": {"generator": {}}, "functional": [{"kind": "entropy"}], "mode": "jd"})");
  bad(R"({"source": {"generator": {}}, "functional": [{"kind": "entropy"}], "optimizer": {"step_size": -1}})");
  bad(R"({"source": {"path": "a.csv", "format": "parquet"}, "functional": [{"kind": "entropy"}]})");
  bad(R"({"source": {"generator": {}}, "functional": [{"kind": "entropy"}], "plot": {"axes": [0]}})");
}

TEST_CASE("target is required exactly when a target-distance term is present") {
  CHECK_THROWS_AS(parse_run_config(R"({"source": {"generator": {}},
    "functional": [{"kind": "target-distance"}]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"source": {"generator": {}}, "target": {"generator": {}},
    "functional": [{"kind": "entropy"}]})"),
                  ConfigError);
  // prepare_run repeats the check before any data is loaded.
  RunConfig c = parse_run_config(R"({"source": {"path": "/nonexistent.csv"},
    "functional": [{"kind": "entropy"}]})");
  c.flow.functional.terms[0].kind = TermKind::target_distance;
  CHECK_THROWS_AS(prepare_run(c), ConfigError);
}

TEST_CASE("trajectory records round-trip and survive truncation") {
  const fs::path dir = scratch("traj");
  GeneratorSpec g;
  g.n = 20;
  g.k = 2;
  const DatasetState s = generate(g);
  FlowConfig c;
  c.steps = 6;
  c.mode = DynamicsMode::jd_vl;
  c.functional.terms.push_back({});
  c.functional.terms[0].potential.form = PotentialForm::quadratic;
  c.relabel_every = 3;
  c.optimizer.step_size = 0.05;
  Trajectory meta;
  meta.term_names = c.functional.term_names();
  meta.mode = c.mode;
  {
    TrajectoryWriter w(dir / "t.jsonl");
    const Trajectory t = run_flow(s, c, [&](const Snapshot& snap) { w.write(snap, meta); });
    REQUIRE(t.snapshots.size() == 7);
  }
  const std::string text = read_text_file(dir / "t.jsonl");
  CHECK(count_lines(text) == 7);
  const Trajectory back = read_trajectory(dir / "t.jsonl");
  REQUIRE(back.snapshots.size() == 7);
  CHECK(back.mode == DynamicsMode::jd_vl);
  CHECK(back.term_names == meta.term_names);
  const Trajectory direct = run_flow(s, c);
  for (std::size_t k = 0; k < 7; ++k) {
    CHECK(back.snapshots[k].step == k);
    CHECK(back.snapshots[k].state.features == direct.snapshots[k].state.features);
    CHECK(back.snapshots[k].state.labels == direct.snapshots[k].state.labels);
    CHECK(back.snapshots[k].objective == direct.snapshots[k].objective);
    CHECK(back.snapshots[k].state.particle_dists.size() == 20);
  }

  // Cut the last record in half: every complete record is still returned.
  const std::size_t last = text.rfind('\n', text.size() - 2);
  const Trajectory cut = parse_trajectory(text.substr(0, last + 1 + (text.size() - last) / 2));
  CHECK(cut.snapshots.size() == 6);
  CHECK(parse_trajectory(text.substr(0, last + 1)).snapshots.size() == 6);
  // Damage in the middle is an error.
  std::string broken = text;
  broken.insert(text.find('\n') + 1, "{oops\n");
  CHECK_THROWS_AS(parse_trajectory(broken), ParseError);
  fs::remove_all(dir);
}

TEST_CASE("svg frames") {
  const fs::path dir = scratch("svg");
  GeneratorSpec g;
  g.n = 60;
  g.k = 4;
  g.seed = 2;
  const DatasetState s = generate(g);
  Trajectory t;
  for (std::size_t k = 0; k < 7; ++k) t.snapshots.push_back({k, s, 0.0, {}, 0.0});
  PlotOptions opts;
  for (std::size_t stride : {1u, 2u, 3u, 7u, 10u}) {
    opts.frame_stride = stride;
    const auto frames = export_frames(t, opts, nullptr, dir / std::to_string(stride));
    CHECK(frames.size() == (7 + stride - 1) / stride);
    for (const auto& f : frames) CHECK(fs::exists(f));
  }
  Trajectory one;
  one.snapshots.push_back({0, s, 0.0, {}, 0.0});
  CHECK(export_frames(one, opts, nullptr, dir / "one").size() == 1);

  GeneratorSpec tg;
  tg.kind = GeneratorKind::rings;
  tg.k = 2;
  tg.n = 30;
  const DatasetState target = generate(tg);
  const std::string svg = render_svg(s, &target, opts, {-8, 8, -8, 8}, "frame");
  std::set<std::string> colors;
  const std::regex fill("<circle[^>]*fill=\"(#[0-9a-fA-F]{6})\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), fill); it != std::sregex_iterator(); ++it) {
    colors.insert((*it)[1]);
  }
  CHECK(colors.size() == 5);
  CHECK(colors.count(kTargetColor) == 1);
  for (int y = 0; y < 4; ++y) CHECK(colors.count(label_color(y)) == 1);
  for (int y = 0; y < 50; ++y) CHECK(label_color(y) != kTargetColor);

  RowMatrix wide = RowMatrix::Zero(3, 5);
  Trajectory hi;
  hi.snapshots.push_back({0, make_state(wide, {0, 1, 1}), 0.0, {}, 0.0});
  CHECK_THROWS_AS(export_frames(hi, PlotOptions{}, nullptr, dir / "hi"), DimensionError);
  PlotOptions picked;
  picked.axes = std::make_pair(1, 4);
  CHECK(export_frames(hi, picked, nullptr, dir / "hi").size() == 1);
  fs::remove_all(dir);
}

TEST_CASE("minimal run writes two zero-objective records") {
  const fs::path dir = scratch("run");
  RunConfig c = parse_run_config(kMinimal);
  c.output_dir = dir;
  const RunResult r = run(c);
  CHECK(r.snapshots == 2);
  CHECK(r.frames == 2);
  const Trajectory t = read_trajectory(r.trajectory);
  REQUIRE(t.snapshots.size() == 2);
  for (const auto& s : t.snapshots) CHECK(s.objective == 0.0);
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "source.csv"));
  CHECK(load_csv(dir / "source.csv").features == generate(*c.source.generator).features);
  fs::remove_all(dir);
}

TEST_CASE("repeated runs give identical trajectories apart from wall time") {
  const fs::path a = scratch("rep_a"), b = scratch("rep_b");
  RunConfig c = parse_run_config(R"({
    "source": {"generator": {"n": 40, "k": 4, "seed": 9}},
    "target": {"generator": {"n": 40, "k": 4, "seed": 10, "rotation": 0.5}},
    "functional": [{"kind": "target-distance"}, {"kind": "entropy", "weight": 0.001}],
    "steps": 5, "seed": 11, "plot": {"enabled": false}
  })");
  c.output_dir = a;
  run(c);
  c.output_dir = b;
  run(c);
  const std::string ta = read_text_file(a / "trajectory.jsonl");
  CHECK(ta.find("wall_time") != std::string::npos);
  CHECK(strip_wall_time(ta) == strip_wall_time(read_text_file(b / "trajectory.jsonl")));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("output directory override") {
  const RunConfig c = parse_run_config(kMinimal);
  const char* old = std::getenv("DSFLOW_OUTPUT_DIR");
  const std::string saved = old ? old : "";
  setenv("DSFLOW_OUTPUT_DIR", "/tmp/elsewhere", 1);
  CHECK(resolve_output_dir(c) == fs::path("/tmp/elsewhere"));
  unsetenv("DSFLOW_OUTPUT_DIR");
  CHECK(resolve_output_dir(c) == fs::path("dsflow_out"));
  if (old) setenv("DSFLOW_OUTPUT_DIR", saved.c_str(), 1);
}
