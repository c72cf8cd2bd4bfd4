#include <initializer_list>
#include <set>
#include <string_view>

#include "dsflow/config.hpp"
#include "dsflow/error.hpp"
#include "json.hpp"

namespace dsflow {
namespace {

using Json = nlohmann::json;

void allow_keys(const Json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  const std::set<std::string_view> allowed(keys);
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + std::string(where));
  }
}

template <class T>
T get(const Json& j, const char* key, T fallback, std::string_view where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string(where) + "." + key + " has the wrong type");
  }
}

double number(const Json& j, const char* key, double fallback, std::string_view where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string(where) + "." + key + " must be a number");
  return j.at(key).get<double>();
}

std::size_t count(const Json& j, const char* key, std::size_t fallback, std::string_view where) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string(where) + "." + key + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

Vector vec(const Json& j, std::string_view what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string(what) + " must contain numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix mat(const Json& j, std::string_view what) {
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + " must be a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vec(j[r], what);
    if (static_cast<std::size_t>(row.size()) != cols) throw ConfigError(std::string(what) + " is ragged");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

GeneratorSpec parse_generator_spec(const Json& j) {
  constexpr std::string_view where = "generator";
  allow_keys(j, where, {"kind", "n", "k", "dim", "radius", "sigma", "noise", "rotation", "center",
                        "means", "seed"});
  GeneratorSpec g;
  g.kind = parse_generator(get<std::string>(j, "kind", "gaussian-mixture", where));
  g.n = get<int>(j, "n", g.n, where);
  g.k = get<int>(j, "k", g.k, where);
  g.dim = get<int>(j, "dim", g.dim, where);
  g.radius = number(j, "radius", g.radius, where);
  g.sigma = number(j, "sigma", g.sigma, where);
  g.noise = number(j, "noise", g.noise, where);
  g.rotation = number(j, "rotation", g.rotation, where);
  if (j.contains("center")) g.center = vec(j["center"], "generator.center");
  if (j.contains("means")) {
    if (!j["means"].is_array()) throw ConfigError("generator.means must be an array");
    for (const auto& m : j["means"]) g.means.push_back(vec(m, "generator.means"));
  }
  g.seed = get<std::uint64_t>(j, "seed", g.seed, where);
  return g;
}

DatasetSource parse_source(const Json& j, std::string_view where, const std::filesystem::path& base) {
  allow_keys(j, where, {"generator", "path", "labels_path", "format", "downscale", "per_class_cap"});
  DatasetSource s;
  if (j.contains("generator") == j.contains("path")) {
    throw ConfigError(std::string(where) + " needs exactly one of 'generator' or 'path'");
  }
  if (j.contains("generator")) {
    s.generator = parse_generator_spec(j["generator"]);
    return s;
  }
  s.path = resolve(base, get<std::string>(j, "path", "", where));
  s.format = get<std::string>(j, "format", "csv", where);
  if (s.format != "csv" && s.format != "idx") {
    throw ConfigError(std::string(where) + ".format must be 'csv' or 'idx'");
  }
  if (s.format == "idx") {
    if (!j.contains("labels_path")) throw ConfigError(std::string(where) + " idx needs labels_path");
    s.labels_path = resolve(base, get<std::string>(j, "labels_path", "", where));
    s.idx.downscale = get<int>(j, "downscale", 1, where);
    s.idx.per_class_cap = get<int>(j, "per_class_cap", 0, where);
  }
  return s;
}

PotentialParams parse_potential_params(const Json& j) {
  PotentialParams p;
  p.form = parse_potential(get<std::string>(j, "form", "quadratic", "potential"));
  p.a = number(j, "a", p.a, "potential");
  if (j.contains("Q")) p.Q = mat(j["Q"], "potential.Q");
  if (j.contains("center")) p.center = vec(j["center"], "potential.center");
  if (j.contains("A")) p.A = mat(j["A"], "potential.A");
  if (j.contains("b")) p.b = vec(j["b"], "potential.b");
  if (j.contains("w")) p.w = vec(j["w"], "potential.w");
  p.offset = number(j, "offset", p.offset, "potential");
  p.radius = number(j, "radius", p.radius, "potential");
  p.positive_label = get<int>(j, "positive_label", p.positive_label, "potential");
  p.negate = get<bool>(j, "negate", p.negate, "potential");
  auto per_class = [&](const char* key, auto&& convert) {
    if (!j.contains(key)) return;
    if (!j[key].is_object()) throw ConfigError(std::string("potential.") + key + " must map class ids");
    for (const auto& [k, v] : j[key].items()) {
      int y = 0;
      try {
        std::size_t used = 0;
        y = std::stoi(k, &used);
        if (used != k.size()) throw std::invalid_argument(k);
      } catch (const std::exception&) {
        throw ConfigError(std::string("potential.") + key + " key '" + k + "' is not a class id");
      }
      convert(y, v);
    }
  };
  per_class("class_A", [&](int y, const Json& v) { p.class_A[y] = mat(v, "potential.class_A"); });
  per_class("class_b", [&](int y, const Json& v) { p.class_b[y] = vec(v, "potential.class_b"); });
  return p;
}

Term parse_term(const Json& j) {
  if (!j.is_object()) throw ConfigError("functional terms must be objects");
  const std::string kind = get<std::string>(j, "kind", "", "functional term");
  Term t;
  if (kind == "target-distance") {
    allow_keys(j, "target-distance term", {"kind", "weight", "name", "reg", "debiased", "max_iter", "tol"});
    t.kind = TermKind::target_distance;
    t.otdd.reg = number(j, "reg", 0.0, "target-distance");
    t.otdd.debiased = get<bool>(j, "debiased", true, "target-distance");
    t.otdd.sinkhorn.max_iter = count(j, "max_iter", t.otdd.sinkhorn.max_iter, "target-distance");
    t.otdd.sinkhorn.tol = number(j, "tol", t.otdd.sinkhorn.tol, "target-distance");
    if (t.otdd.reg < 0.0) throw ConfigError("target-distance.reg must be nonnegative");
    if (!(t.otdd.sinkhorn.tol > 0.0)) throw ConfigError("target-distance.tol must be positive");
  } else if (kind == "potential") {
    allow_keys(j, "potential term", {"kind", "weight", "name", "form", "a", "Q", "center", "A", "b",
                                     "w", "offset", "radius", "positive_label", "negate", "class_A",
                                     "class_b"});
    t.kind = TermKind::potential;
    t.potential = parse_potential_params(j);
  } else if (kind == "interaction") {
    allow_keys(j, "interaction term", {"kind", "weight", "name", "form"});
    t.kind = TermKind::interaction;
    t.interaction = parse_interaction(get<std::string>(j, "form", "class-repulsion", "interaction"));
  } else if (kind == "entropy") {
    allow_keys(j, "entropy term", {"kind", "weight", "name"});
    t.kind = TermKind::entropy;
  } else {
    throw ConfigError("unknown functional term kind '" + kind + "'");
  }
  t.weight = number(j, "weight", 1.0, "functional term");
  t.name = get<std::string>(j, "name", "", "functional term");
  return t;
}

OptimizerConfig parse_optimizer(const Json& j) {
  constexpr std::string_view where = "optimizer";
  allow_keys(j, where, {"rule", "step_size", "mean_step_size", "cov_step_size", "momentum", "beta1",
                        "beta2", "adam_eps", "adagrad_eps"});
  OptimizerConfig o;
  o.rule = parse_rule(get<std::string>(j, "rule", "sgd", where));
  o.step_size = number(j, "step_size", o.step_size, where);
  o.mean_step_size = number(j, "mean_step_size", o.mean_step_size, where);
  o.cov_step_size = number(j, "cov_step_size", o.cov_step_size, where);
  o.momentum = number(j, "momentum", o.momentum, where);
  o.beta1 = number(j, "beta1", o.beta1, where);
  o.beta2 = number(j, "beta2", o.beta2, where);
  o.adam_eps = number(j, "adam_eps", o.adam_eps, where);
  o.adagrad_eps = number(j, "adagrad_eps", o.adagrad_eps, where);
  return o;
}

ClusteringConfig parse_clustering(const Json& j) {
  constexpr std::string_view where = "clustering";
  allow_keys(j, where, {"method", "eps", "min_pts", "k"});
  ClusteringConfig c;
  const std::string method = get<std::string>(j, "method", "dbscan", where);
  if (method == "dbscan") {
    c.method = ClusterMethod::dbscan;
  } else if (method == "kmeans") {
    c.method = ClusterMethod::kmeans;
  } else {
    throw ConfigError("clustering.method must be 'dbscan' or 'kmeans'");
  }
  c.eps = number(j, "eps", c.eps, where);
  c.min_pts = get<int>(j, "min_pts", c.min_pts, where);
  c.k = get<int>(j, "k", c.k, where);
  return c;
}

PlotOptions parse_plot(const Json& j) {
  constexpr std::string_view where = "plot";
  allow_keys(j, where, {"enabled", "frame_stride", "axes", "target", "width", "height", "point_radius"});
  PlotOptions p;
  p.enabled = get<bool>(j, "enabled", p.enabled, where);
  p.frame_stride = count(j, "frame_stride", p.frame_stride, where);
  if (p.frame_stride < 1) throw ConfigError("plot.frame_stride must be at least 1");
  if (j.contains("axes")) {
    const auto axes = get<std::vector<int>>(j, "axes", {}, where);
    if (axes.size() != 2 || axes[0] < 0 || axes[1] < 0) {
      throw ConfigError("plot.axes must be a pair of feature indices");
    }
    p.axes = std::make_pair(axes[0], axes[1]);
  }
  p.show_target = get<bool>(j, "target", p.show_target, where);
  p.width = get<int>(j, "width", p.width, where);
  p.height = get<int>(j, "height", p.height, where);
  p.point_radius = number(j, "point_radius", p.point_radius, where);
  if (p.width < 16 || p.height < 16) throw ConfigError("plot size too small");
  return p;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  constexpr std::string_view where = "config";
  allow_keys(j, where, {"source", "target", "mode", "functional", "optimizer", "steps", "noise_scale",
                        "noise_schedule", "noise_mode", "relabel_every", "clustering", "seed",
                        "record_every", "output_dir", "plot", "convexity"});
  RunConfig c;
  if (!j.contains("source")) throw ConfigError("config needs a 'source' dataset");
  c.source = parse_source(j["source"], "source", base);
  if (j.contains("target")) c.target = parse_source(j["target"], "target", base);

  FlowConfig& f = c.flow;
  f.mode = parse_mode(get<std::string>(j, "mode", "fd", where));
  if (!j.contains("functional") || !j["functional"].is_array()) {
    throw ConfigError("config needs a 'functional' array of terms");
  }
  for (const auto& t : j["functional"]) f.functional.terms.push_back(parse_term(t));
  if (f.functional.terms.empty()) throw ConfigError("functional has no terms");
  if (j.contains("optimizer")) f.optimizer = parse_optimizer(j["optimizer"]);
  f.steps = count(j, "steps", f.steps, where);
  f.noise_scale = number(j, "noise_scale", f.noise_scale, where);
  const std::string schedule = get<std::string>(j, "noise_schedule", "inverse_sqrt", where);
  if (schedule == "inverse_sqrt") {
    f.noise_schedule = NoiseSchedule::inverse_sqrt;
  } else if (schedule == "constant") {
    f.noise_schedule = NoiseSchedule::constant;
  } else {
    throw ConfigError("noise_schedule must be 'inverse_sqrt' or 'constant'");
  }
  const std::string nmode = get<std::string>(j, "noise_mode", "evaluation_point", where);
  if (nmode == "evaluation_point") {
    f.noise_mode = NoiseMode::evaluation_point;
  } else if (nmode == "state") {
    f.noise_mode = NoiseMode::state;
  } else {
    throw ConfigError("noise_mode must be 'evaluation_point' or 'state'");
  }
  f.relabel_every = count(j, "relabel_every", f.relabel_every, where);
  if (j.contains("clustering")) f.clustering = parse_clustering(j["clustering"]);
  f.seed = get<std::uint64_t>(j, "seed", f.seed, where);
  f.record_every = count(j, "record_every", f.record_every, where);
  if (f.steps < 1) throw ConfigError("steps must be at least 1");
  if (f.record_every < 1) throw ConfigError("record_every must be at least 1");
  if (!(f.noise_scale >= 0.0)) throw ConfigError("noise_scale must be nonnegative");
  validate_optimizer(f.optimizer);

  c.output_dir = resolve(base, get<std::string>(j, "output_dir", "dsflow_out", where));
  if (j.contains("plot")) c.plot = parse_plot(j["plot"]);
  if (j.contains("convexity")) {
    const Json& cv = j["convexity"];
    allow_keys(cv, "convexity", {"lambda", "generalized"});
    c.convexity.lambda = number(cv, "lambda", 0.0, "convexity");
    c.convexity.generalized = get<bool>(cv, "generalized", false, "convexity");
  }

  const bool needs_target = f.functional.has_target_distance();
  if (needs_target && !c.target) {
    throw ConfigError("functional has a target-distance term but no target dataset is given");
  }
  if (!needs_target && c.target) {
    throw ConfigError("a target dataset is given but the functional has no target-distance term");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.parent_path());
}

DatasetState load_source(const DatasetSource& src) {
  if (src.generator) return generate(*src.generator);
  if (src.format == "idx") return load_idx(src.path, src.labels_path, src.idx);
  return load_csv(src.path);
}

}  // namespace dsflow
