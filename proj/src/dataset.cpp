#include "dsflow/dataset.hpp"

#include <set>
#include <string>

#include "dsflow/error.hpp"
#include "dsflow/ot.hpp"

namespace dsflow {

std::string_view mode_name(DynamicsMode mode) {
  switch (mode) {
    case DynamicsMode::fd:
      return "fd";
    case DynamicsMode::jd_fl:
      return "jd-fl";
    case DynamicsMode::jd_vl:
      return "jd-vl";
  }
  return "fd";
}

DynamicsMode parse_mode(std::string_view name) {
  if (name == "fd") return DynamicsMode::fd;
  if (name == "jd-fl") return DynamicsMode::jd_fl;
  if (name == "jd-vl") return DynamicsMode::jd_vl;
  throw ConfigError("unknown dynamics mode '" + std::string(name) + "'");
}

Particle DatasetState::particle(Eigen::Index i) const {
  return Particle{features.row(i).transpose(), labels[static_cast<std::size_t>(i)]};
}

const LabelDistribution& DatasetState::label_dist(Eigen::Index i) const {
  if (per_particle()) return particle_dists[static_cast<std::size_t>(i)];
  const int y = labels[static_cast<std::size_t>(i)];
  const auto it = class_dists.find(y);
  if (it == class_dists.end()) {
    throw DegenerateClassError("no label distribution for class " + std::to_string(y), y);
  }
  return it->second;
}

std::vector<int> DatasetState::class_ids() const {
  std::set<int> ids(labels.begin(), labels.end());
  return {ids.begin(), ids.end()};
}

DatasetState make_state(RowMatrix features, std::vector<int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw DimensionError("make_state: feature rows and label count differ");
  }
  DatasetState s;
  s.features = std::move(features);
  s.labels = std::move(labels);
  s.weights = uniform_weights(s.features.rows());
  refresh_label_stats(s);
  return s;
}

std::map<int, LabelDistribution> label_stats(const DatasetState& state) {
  const Eigen::Index n = state.size();
  const Eigen::Index d = state.dim();
  if (static_cast<Eigen::Index>(state.labels.size()) != n || state.weights.size() != n) {
    throw DimensionError("label_stats: features, labels and weights disagree in length");
  }
  struct Acc {
    double mass = 0.0;
    std::size_t count = 0;
    Vector sum;
  };
  std::map<int, Acc> acc;
  for (const auto& [y, dist] : state.class_dists) acc[y];
  for (Eigen::Index i = 0; i < n; ++i) {
    Acc& a = acc[state.labels[static_cast<std::size_t>(i)]];
    if (a.count == 0) a.sum = Vector::Zero(d);
    a.mass += state.weights[i];
    a.count += 1;
    a.sum += state.weights[i] * state.features.row(i).transpose();
  }
  std::map<int, LabelDistribution> out;
  for (auto& [y, a] : acc) {
    if (a.count == 0 || !(a.mass > 0.0)) {
      throw DegenerateClassError("class " + std::to_string(y) + " has no particles", y);
    }
    out[y] = LabelDistribution{a.sum / a.mass, Matrix::Zero(d, d)};
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = state.labels[static_cast<std::size_t>(i)];
    LabelDistribution& ld = out[y];
    const Vector c = state.features.row(i).transpose() - ld.mean;
    ld.cov.noalias() += (state.weights[i] / acc[y].mass) * (c * c.transpose());
  }
  for (auto& [y, ld] : out) {
    const Matrix sym = 0.5 * (ld.cov + ld.cov.transpose());
    ld.cov = project_psd(sym, psd_floor(sym));
  }
  return out;
}

void refresh_label_stats(DatasetState& state) { state.class_dists = label_stats(state); }

void decouple(DatasetState& state) {
  state.particle_dists.clear();
  state.particle_dists.reserve(state.labels.size());
  for (int y : state.labels) {
    const auto it = state.class_dists.find(y);
    if (it == state.class_dists.end()) {
      throw DegenerateClassError("no label distribution for class " + std::to_string(y), y);
    }
    state.particle_dists.push_back(it->second);
  }
}

void validate_state(const DatasetState& state, DynamicsMode mode) {
  const Eigen::Index n = state.size();
  if (n == 0) throw SizeError("dataset has no particles");
  if (static_cast<Eigen::Index>(state.labels.size()) != n) {
    throw DimensionError("dataset: label count differs from particle count");
  }
  validate_weights(state.weights, "dataset");
  if (state.weights.size() != n) throw DimensionError("dataset: weight count mismatch");
  if (!state.features.allFinite()) throw NumericInputError("dataset: non-finite features");
  for (int y : state.labels) {
    if (y < 0) throw DimensionError("dataset: negative class id " + std::to_string(y));
  }
  auto check = [&](const LabelDistribution& ld) {
    if (ld.mean.size() != state.dim() || ld.cov.rows() != state.dim() ||
        ld.cov.cols() != state.dim()) {
      throw DimensionError("dataset: label distribution dimension mismatch");
    }
    if (!ld.mean.allFinite() || !ld.cov.allFinite()) {
      throw NumericInputError("dataset: non-finite label distribution");
    }
  };
  if (mode == DynamicsMode::jd_vl) {
    if (static_cast<Eigen::Index>(state.particle_dists.size()) != n) {
      throw DimensionError("dataset: jd-vl requires one label distribution per particle");
    }
    for (const auto& ld : state.particle_dists) check(ld);
  } else {
    for (int y : state.labels) {
      if (!state.class_dists.count(y)) {
        throw DegenerateClassError("no label distribution for class " + std::to_string(y), y);
      }
    }
    for (const auto& [y, ld] : state.class_dists) check(ld);
  }
}

}  // namespace dsflow
