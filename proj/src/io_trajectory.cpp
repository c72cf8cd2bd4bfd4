#include <sstream>
#include <string_view>

#include "dsflow/error.hpp"
#include "dsflow/io.hpp"
#include "json.hpp"

namespace dsflow {
namespace {

using Json = nlohmann::ordered_json;

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json matrix_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

Json dist_json(const LabelDistribution& d) {
  Json o = Json::object();
  o["mean"] = vector_json(d.mean);
  o["cov"] = matrix_json(d.cov);
  return o;
}

Vector json_vector(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

Matrix json_matrix(const Json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw std::invalid_argument("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

LabelDistribution json_dist(const Json& j) {
  return LabelDistribution{json_vector(j.at("mean")), json_matrix(j.at("cov"))};
}

Snapshot snapshot_from(const Json& j, Trajectory& meta, bool first) {
  Snapshot s;
  s.step = j.at("step").get<std::size_t>();
  s.objective = j.at("objective").get<double>();
  s.wall_time = j.at("wall_time").get<double>();
  std::vector<std::string> names;
  for (const auto& [name, value] : j.at("terms").items()) {
    names.push_back(name);
    s.term_values.push_back(value.get<double>());
  }
  if (first) {
    meta.term_names = names;
    if (j.contains("mode")) meta.mode = parse_mode(j.at("mode").get<std::string>());
  }
  const Json& f = j.at("features");
  const auto n = static_cast<Eigen::Index>(f.size());
  const Eigen::Index d = n == 0 ? 0 : static_cast<Eigen::Index>(f.at(0).size());
  s.state.features.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Json& row = f.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != d) throw std::invalid_argument("ragged features");
    for (Eigen::Index c = 0; c < d; ++c) s.state.features(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  s.state.labels = j.at("labels").get<std::vector<int>>();
  if (static_cast<Eigen::Index>(s.state.labels.size()) != n) {
    throw std::invalid_argument("label count differs from particle count");
  }
  s.state.weights = j.contains("weights") ? json_vector(j.at("weights"))
                                          : Vector::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  for (const Json& e : j.at("label_dists")) {
    s.state.class_dists[e.at("label").get<int>()] = json_dist(e);
  }
  if (j.contains("particle_dists")) {
    for (const Json& e : j.at("particle_dists")) s.state.particle_dists.push_back(json_dist(e));
  }
  return s;
}

}  // namespace

std::string trajectory_record(const Snapshot& s, const Trajectory& meta) {
  Json j = Json::object();
  j["step"] = s.step;
  j["mode"] = std::string(mode_name(meta.mode));
  j["objective"] = s.objective;
  Json terms = Json::object();
  for (std::size_t k = 0; k < s.term_values.size(); ++k) {
    const std::string name = k < meta.term_names.size() ? meta.term_names[k] : "term" + std::to_string(k);
    terms[name] = s.term_values[k];
  }
  j["terms"] = std::move(terms);
  j["wall_time"] = s.wall_time;
  Json features = Json::array();
  for (Eigen::Index i = 0; i < s.state.size(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < s.state.dim(); ++c) row.push_back(s.state.features(i, c));
    features.push_back(std::move(row));
  }
  j["features"] = std::move(features);
  j["labels"] = s.state.labels;
  const Eigen::Index n = s.state.size();
  if (n > 0 && (s.state.weights.array() - 1.0 / static_cast<double>(n)).abs().maxCoeff() > 0.0) {
    j["weights"] = vector_json(s.state.weights);
  }
  Json dists = Json::array();
  for (const auto& [y, d] : s.state.class_dists) {
    Json e = Json::object();
    e["label"] = y;
    e["mean"] = vector_json(d.mean);
    e["cov"] = matrix_json(d.cov);
    dists.push_back(std::move(e));
  }
  j["label_dists"] = std::move(dists);
  if (s.state.per_particle()) {
    Json pd = Json::array();
    for (const auto& d : s.state.particle_dists) pd.push_back(dist_json(d));
    j["particle_dists"] = std::move(pd);
  }
  return j.dump();
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
}

void TrajectoryWriter::write(const Snapshot& s, const Trajectory& meta) {
  out_ << trajectory_record(s, meta) << '\n';
  out_.flush();
  if (!out_) throw IoError("error while writing '" + path_.string() + "'");
}

Trajectory parse_trajectory(const std::string& text) {
  Trajectory t;
  std::vector<std::string_view> lines;
  std::string_view rest(text);
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    lines.push_back(rest.substr(0, nl));
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t\r") == std::string_view::npos) {
    lines.pop_back();
  }
  for (std::size_t l = 0; l < lines.size(); ++l) {
    if (lines[l].find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const Json j = Json::parse(lines[l]);
      t.snapshots.push_back(snapshot_from(j, t, t.snapshots.empty()));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      if (l + 1 == lines.size()) break;  // record cut short by an interrupted write
      throw ParseError("trajectory line " + std::to_string(l + 1) + ": " + e.what(), l + 1);
    }
  }
  return t;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  return parse_trajectory(read_text_file(path));
}

}  // namespace dsflow
