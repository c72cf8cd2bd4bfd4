#include "dsflow/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "dsflow/error.hpp"

namespace dsflow {
namespace {

void check(const GeneratorSpec& s) {
  if (s.k < 1) throw ConfigError("generator: k must be at least 1");
  if (s.n < s.k) throw ConfigError("generator: n must be at least k");
  if (s.dim < 1) throw ConfigError("generator: dim must be at least 1");
  if (!(s.sigma >= 0.0) || !(s.noise >= 0.0) || !std::isfinite(s.sigma) || !std::isfinite(s.noise)) {
    throw ConfigError("generator: sigma and noise must be finite and nonnegative");
  }
  if (!std::isfinite(s.radius) || !std::isfinite(s.rotation)) {
    throw ConfigError("generator: radius and rotation must be finite");
  }
  if (s.center.size() != 0 && s.center.size() != s.dim) {
    throw ConfigError("generator: center must have length dim");
  }
  if (!s.means.empty()) {
    if (static_cast<int>(s.means.size()) != s.k) throw ConfigError("generator: need one mean per class");
    for (const auto& m : s.means) {
      if (m.size() != s.dim) throw ConfigError("generator: mean of wrong length");
    }
  }
  if (s.kind == GeneratorKind::moons && s.k != 2) throw ConfigError("moons: k must be 2");
  if (s.kind == GeneratorKind::swiss_roll && s.dim < 2) throw ConfigError("swiss-roll: dim must be at least 2");
  if ((s.kind == GeneratorKind::moons || s.kind == GeneratorKind::rings) && s.dim < 2) {
    throw ConfigError("generator: dim must be at least 2");
  }
}

Vector circle_mean(const GeneratorSpec& s, int c) {
  Vector m = Vector::Zero(s.dim);
  const double angle = 2.0 * std::numbers::pi * c / s.k + s.rotation;
  m[0] = s.radius * std::cos(angle);
  if (s.dim > 1) m[1] = s.radius * std::sin(angle);
  return m;
}

}  // namespace

std::string_view generator_name(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::gaussian_mixture:
      return "gaussian-mixture";
    case GeneratorKind::swiss_roll:
      return "swiss-roll";
    case GeneratorKind::moons:
      return "moons";
    case GeneratorKind::rings:
      return "rings";
  }
  return "gaussian-mixture";
}

GeneratorKind parse_generator(std::string_view name) {
  for (auto k : {GeneratorKind::gaussian_mixture, GeneratorKind::swiss_roll, GeneratorKind::moons,
                 GeneratorKind::rings}) {
    if (generator_name(k) == name) return k;
  }
  throw ConfigError("unknown generator '" + std::string(name) + "'");
}

double swiss_roll_arc_length(double t) {
  return 0.5 * (t * std::sqrt(1.0 + t * t) + std::asinh(t));
}

DatasetState generate(const GeneratorSpec& s) {
  check(s);
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, s.k - 1);

  RowMatrix x = RowMatrix::Zero(s.n, s.dim);
  std::vector<int> labels(static_cast<std::size_t>(s.n));
  const double s_lo = swiss_roll_arc_length(kSwissRollTMin);
  const double s_hi = swiss_roll_arc_length(kSwissRollTMax);

  for (int i = 0; i < s.n; ++i) {
    auto row = x.row(i);
    int y = 0;
    switch (s.kind) {
      case GeneratorKind::gaussian_mixture: {
        y = pick(rng);
        const Vector m = s.means.empty() ? circle_mean(s, y) : s.means[static_cast<std::size_t>(y)];
        for (int c = 0; c < s.dim; ++c) row[c] = m[c] + s.sigma * normal(rng);
        break;
      }
      case GeneratorKind::swiss_roll: {
        const double t = kSwissRollTMin + (kSwissRollTMax - kSwissRollTMin) * unit(rng);
        row[0] = t * std::cos(t);
        if (s.dim == 2) {
          row[1] = t * std::sin(t);
        } else {
          row[1] = 21.0 * unit(rng);
          row[2] = t * std::sin(t);
        }
        const double frac = (swiss_roll_arc_length(t) - s_lo) / (s_hi - s_lo);
        y = std::min(s.k - 1, static_cast<int>(frac * s.k));
        break;
      }
      case GeneratorKind::moons: {
        y = pick(rng);
        const double th = std::numbers::pi * unit(rng);
        if (y == 0) {
          row[0] = std::cos(th);
          row[1] = std::sin(th);
        } else {
          row[0] = 1.0 - std::cos(th);
          row[1] = 0.5 - std::sin(th);
        }
        break;
      }
      case GeneratorKind::rings: {
        y = pick(rng);
        const double th = 2.0 * std::numbers::pi * unit(rng);
        const double r = s.radius * (y + 1) / s.k;
        row[0] = r * std::cos(th);
        row[1] = r * std::sin(th);
        break;
      }
    }
    if (s.kind != GeneratorKind::gaussian_mixture && s.noise > 0.0) {
      for (int c = 0; c < s.dim; ++c) row[c] += s.noise * normal(rng);
    }
    labels[static_cast<std::size_t>(i)] = y;
  }
  if (s.center.size() != 0) x.rowwise() += s.center.transpose();
  return make_state(std::move(x), std::move(labels));
}

}  // namespace dsflow
