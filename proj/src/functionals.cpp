#include "dsflow/functionals.hpp"

#include <cmath>
#include <set>
#include <string>

#include "dsflow/error.hpp"

namespace dsflow {
namespace {

Vector or_zero(const Vector& v, Eigen::Index d) { return v.size() == 0 ? Vector::Zero(d) : v; }

Matrix quadratic_matrix(const PotentialParams& p, Eigen::Index d) {
  if (p.Q.size() == 0) return p.a * Matrix::Identity(d, d);
  return 0.5 * (p.Q + p.Q.transpose());
}

double hinge_sign(const PotentialParams& p, int label) {
  const double y = label == p.positive_label ? 1.0 : -1.0;
  return p.negate ? -y : y;
}

const Matrix& class_matrix(const PotentialParams& p, int y) {
  const auto it = p.class_A.find(y);
  if (it == p.class_A.end()) {
    throw DimensionError("class-affine-norm potential has no matrix for class " + std::to_string(y));
  }
  return it->second;
}

const Vector& class_vector(const PotentialParams& p, int y) {
  const auto it = p.class_b.find(y);
  if (it == p.class_b.end()) {
    throw DimensionError("class-affine-norm potential has no offset for class " + std::to_string(y));
  }
  return it->second;
}

// Value and gradient of V at one particle.
double potential_at(const PotentialParams& p, const Eigen::Ref<const Vector>& x, int label,
                    Vector* grad) {
  const Eigen::Index d = x.size();
  switch (p.form) {
    case PotentialForm::quadratic: {
      const Matrix q = quadratic_matrix(p, d);
      const Vector r = x - or_zero(p.center, d);
      const Vector qr = q * r;
      if (grad) *grad = qr;
      return 0.5 * r.dot(qr);
    }
    case PotentialForm::linear:
      if (grad) *grad = p.w;
      return p.w.dot(x) + p.offset;
    case PotentialForm::affine_norm:
    case PotentialForm::class_affine_norm: {
      const bool per_class = p.form == PotentialForm::class_affine_norm;
      const Matrix a = per_class ? class_matrix(p, label)
                                 : (p.A.size() == 0 ? Matrix(Matrix::Identity(d, d)) : p.A);
      const Vector b = per_class ? class_vector(p, label) : or_zero(p.b, a.rows());
      const Vector r = a * x - b;
      const double norm = r.norm();
      if (grad) *grad = norm > 0.0 ? Vector(a.transpose() * r / norm) : Vector::Zero(d);
      return norm;
    }
    case PotentialForm::hinge: {
      const double s = hinge_sign(p, label);
      const double m = s * (x.dot(p.w) - p.offset);
      if (grad) *grad = m > 0.0 ? Vector(s * p.w) : Vector::Zero(d);
      return std::max(0.0, m);
    }
    case PotentialForm::radial_shell: {
      const Vector r = x - or_zero(p.center, d);
      const double norm = r.norm();
      const double excess = norm - p.radius;
      if (grad) *grad = excess > 0.0 && norm > 0.0 ? Vector(r / norm) : Vector::Zero(d);
      return std::max(0.0, excess);
    }
  }
  return 0.0;
}

std::string default_name(const Term& t) {
  switch (t.kind) {
    case TermKind::target_distance:
      return "target-distance";
    case TermKind::potential:
      return "potential:" + std::string(potential_name(t.potential.form));
    case TermKind::interaction:
      return "interaction:" + std::string(interaction_name(t.interaction));
    case TermKind::entropy:
      return "entropy";
  }
  return "term";
}

void check_vector(const Vector& v, Eigen::Index d, const char* what, bool optional) {
  if (optional && v.size() == 0) return;
  if (v.size() != d) throw ConfigError(std::string(what) + " must have length " + std::to_string(d));
  if (!v.allFinite()) throw ConfigError(std::string(what) + " has non-finite entries");
}

void check_potential(const PotentialParams& p, Eigen::Index d) {
  switch (p.form) {
    case PotentialForm::quadratic:
      check_vector(p.center, d, "quadratic center", true);
      if (p.Q.size() != 0 && (p.Q.rows() != d || p.Q.cols() != d)) {
        throw ConfigError("quadratic Q must be " + std::to_string(d) + "x" + std::to_string(d));
      }
      if (!std::isfinite(p.a)) throw ConfigError("quadratic scale must be finite");
      break;
    case PotentialForm::linear:
    case PotentialForm::hinge:
      check_vector(p.w, d, "potential w", false);
      break;
    case PotentialForm::affine_norm:
      if (p.A.size() != 0 && p.A.cols() != d) {
        throw ConfigError("affine-norm A must have " + std::to_string(d) + " columns");
      }
      check_vector(p.b, p.A.size() != 0 ? p.A.rows() : d, "affine-norm b", true);
      break;
    case PotentialForm::class_affine_norm:
      for (const auto& [y, a] : p.class_A) {
        if (a.cols() != d) throw ConfigError("class-affine-norm A has the wrong column count");
        const auto it = p.class_b.find(y);
        if (it == p.class_b.end() || it->second.size() != a.rows()) {
          throw ConfigError("class-affine-norm b missing or mis-sized for class " +
                            std::to_string(y));
        }
      }
      break;
    case PotentialForm::radial_shell:
      check_vector(p.center, d, "radial-shell center", true);
      if (!std::isfinite(p.radius)) throw ConfigError("radial-shell radius must be finite");
      break;
  }
}

template <class Kernel>
void pair_loop(const DatasetState& s, Kernel&& k) {
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (s.labels[static_cast<std::size_t>(i)] == s.labels[static_cast<std::size_t>(j)]) continue;
      k(i, j);
    }
  }
}

}  // namespace

std::string_view potential_name(PotentialForm f) {
  switch (f) {
    case PotentialForm::quadratic:
      return "quadratic";
    case PotentialForm::linear:
      return "linear";
    case PotentialForm::affine_norm:
      return "affine-norm";
    case PotentialForm::class_affine_norm:
      return "class-affine-norm";
    case PotentialForm::hinge:
      return "hinge";
    case PotentialForm::radial_shell:
      return "radial-shell";
  }
  return "quadratic";
}

PotentialForm parse_potential(std::string_view name) {
  for (auto f : {PotentialForm::quadratic, PotentialForm::linear, PotentialForm::affine_norm,
                 PotentialForm::class_affine_norm, PotentialForm::hinge,
                 PotentialForm::radial_shell}) {
    if (potential_name(f) == name) return f;
  }
  throw ConfigError("unknown potential form '" + std::string(name) + "'");
}

std::string_view interaction_name(InteractionForm f) {
  switch (f) {
    case InteractionForm::class_repulsion:
      return "class-repulsion";
    case InteractionForm::cross_class_quadratic:
      return "cross-class-quadratic";
  }
  return "class-repulsion";
}

InteractionForm parse_interaction(std::string_view name) {
  for (auto f : {InteractionForm::class_repulsion, InteractionForm::cross_class_quadratic}) {
    if (interaction_name(f) == name) return f;
  }
  throw ConfigError("unknown interaction form '" + std::string(name) + "'");
}

std::string_view term_kind_name(TermKind k) {
  switch (k) {
    case TermKind::target_distance:
      return "target-distance";
    case TermKind::potential:
      return "potential";
    case TermKind::interaction:
      return "interaction";
    case TermKind::entropy:
      return "entropy";
  }
  return "potential";
}

bool FunctionalSpec::has_target_distance() const {
  for (const auto& t : terms) {
    if (t.kind == TermKind::target_distance) return true;
  }
  return false;
}

double FunctionalSpec::entropy_weight() const {
  double w = 0.0;
  for (const auto& t : terms) {
    if (t.kind == TermKind::entropy) w += t.weight;
  }
  return w;
}

std::vector<std::string> FunctionalSpec::term_names() const {
  std::vector<std::string> names;
  std::set<std::string> used;
  for (const auto& t : terms) {
    const std::string base = t.name.empty() ? default_name(t) : t.name;
    std::string name = base;
    for (int k = 2; used.count(name); ++k) name = base + "#" + std::to_string(k);
    used.insert(name);
    names.push_back(name);
  }
  return names;
}

void validate_spec(const FunctionalSpec& spec, Eigen::Index dim) {
  if (spec.terms.empty()) throw ConfigError("functional has no terms");
  for (const auto& t : spec.terms) {
    if (!std::isfinite(t.weight)) throw ConfigError("functional term weight must be finite");
    switch (t.kind) {
      case TermKind::target_distance:
        if (!t.target) throw ConfigError("target-distance term requires a target dataset");
        if (t.target->dim() != dim) {
          throw ConfigError("target dataset dimension differs from the source");
        }
        break;
      case TermKind::potential:
        check_potential(t.potential, dim);
        break;
      case TermKind::entropy:
        if (t.weight < 0.0) throw ConfigError("entropy weight must be nonnegative");
        break;
      case TermKind::interaction:
        break;
    }
  }
}

double eval_potential(const DatasetState& state, const PotentialParams& p) {
  check_potential(p, state.dim());
  if (p.form == PotentialForm::quadratic) {
    const Eigen::Index d = state.dim();
    const RowMatrix r = state.features.rowwise() - or_zero(p.center, d).transpose();
    const RowMatrix rq = r * quadratic_matrix(p, d);
    return 0.5 * state.weights.dot(r.cwiseProduct(rq).rowwise().sum());
  }
  double v = 0.0;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    v += state.weights[i] *
         potential_at(p, state.features.row(i).transpose(), state.labels[static_cast<std::size_t>(i)],
                      nullptr);
  }
  return v;
}

RowMatrix potential_grad(const DatasetState& state, const PotentialParams& p) {
  check_potential(p, state.dim());
  if (p.form == PotentialForm::quadratic) {
    const Eigen::Index d = state.dim();
    return (state.features.rowwise() - or_zero(p.center, d).transpose()) * quadratic_matrix(p, d);
  }
  RowMatrix g(state.size(), state.dim());
  Vector gi;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    potential_at(p, state.features.row(i).transpose(), state.labels[static_cast<std::size_t>(i)],
                 &gi);
    g.row(i) = gi.transpose();
  }
  return g;
}

double eval_interaction(const DatasetState& state, InteractionForm form) {
  double v = 0.0;
  pair_loop(state, [&](Eigen::Index i, Eigen::Index j) {
    const double r2 = (state.features.row(i) - state.features.row(j)).squaredNorm();
    const double w = form == InteractionForm::class_repulsion ? std::exp(-r2) : -r2;
    v += state.weights[i] * state.weights[j] * w;
  });
  return 0.5 * v;
}

RowMatrix interaction_grad(const DatasetState& state, InteractionForm form) {
  RowMatrix g = RowMatrix::Zero(state.size(), state.dim());
  pair_loop(state, [&](Eigen::Index i, Eigen::Index j) {
    const auto diff = state.features.row(i) - state.features.row(j);
    const double scale = form == InteractionForm::class_repulsion
                             ? -2.0 * std::exp(-diff.squaredNorm())
                             : -2.0;
    g.row(i) += state.weights[j] * scale * diff;
  });
  return g;
}

FunctionalValue grad_functional(const DatasetState& state, const FunctionalSpec& spec,
                                DynamicsMode mode, FunctionalWorkspace* ws) {
  if (ws != nullptr && ws->otdd.size() != spec.terms.size()) ws->otdd.resize(spec.terms.size());
  FunctionalValue out;
  out.grads = FlowGradients::zeros(state, mode);
  out.term_values.assign(spec.terms.size(), 0.0);
  for (std::size_t k = 0; k < spec.terms.size(); ++k) {
    const Term& t = spec.terms[k];
    if (t.weight == 0.0) continue;
    double v = 0.0;
    switch (t.kind) {
      case TermKind::target_distance: {
        if (!t.target) throw ConfigError("target-distance term requires a target dataset");
        const OtddResult r = otdd(state, *t.target, t.otdd, ws ? &ws->otdd[k] : nullptr);
        v = r.divergence;
        out.grads.axpy(t.weight, otdd_grads(state, *t.target, r, mode));
        break;
      }
      case TermKind::potential:
        v = eval_potential(state, t.potential);
        out.grads.d_features += t.weight * potential_grad(state, t.potential);
        break;
      case TermKind::interaction:
        v = eval_interaction(state, t.interaction);
        out.grads.d_features += t.weight * interaction_grad(state, t.interaction);
        break;
      case TermKind::entropy:
        break;
    }
    out.term_values[k] = v;
    out.value += t.weight * v;
  }
  return out;
}

double eval_functional(const DatasetState& state, const FunctionalSpec& spec,
                       std::vector<double>* term_values) {
  if (term_values) term_values->assign(spec.terms.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < spec.terms.size(); ++k) {
    const Term& t = spec.terms[k];
    if (t.weight == 0.0) continue;
    double v = 0.0;
    switch (t.kind) {
      case TermKind::target_distance:
        if (!t.target) throw ConfigError("target-distance term requires a target dataset");
        v = otdd(state, *t.target, t.otdd).divergence;
        break;
      case TermKind::potential:
        v = eval_potential(state, t.potential);
        break;
      case TermKind::interaction:
        v = eval_interaction(state, t.interaction);
        break;
      case TermKind::entropy:
        break;
    }
    if (term_values) (*term_values)[k] = v;
    total += t.weight * v;
  }
  return total;
}

}  // namespace dsflow
