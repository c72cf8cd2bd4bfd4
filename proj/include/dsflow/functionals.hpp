#pragma once

// Objective functionals on labeled particle systems: distance to a target
// dataset, potential energies, pairwise interaction energies and entropy.

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dsflow/dataset.hpp"
#include "dsflow/gradients.hpp"
#include "dsflow/otdd.hpp"

namespace dsflow {

enum class PotentialForm {
  quadratic,          // 1/2 (x - c)^T Q (x - c), Q = a I unless given
  linear,             // w^T x + offset
  affine_norm,        // ||A x - b||
  class_affine_norm,  // ||A_y x - b_y||
  hinge,              // max{0, y (x^T w - offset)}, y = +1 for positive_label else -1
  radial_shell,       // (||x - c|| - radius)_+
};

enum class InteractionForm {
  class_repulsion,      // exp(-||x - x'||^2) when y != y'
  cross_class_quadratic,  // -||x - x'||^2 when y != y'
};

std::string_view potential_name(PotentialForm f);
PotentialForm parse_potential(std::string_view name);
std::string_view interaction_name(InteractionForm f);
InteractionForm parse_interaction(std::string_view name);

struct PotentialParams {
  PotentialForm form = PotentialForm::quadratic;
  double a = 1.0;
  Matrix Q;        // overrides a when non-empty
  Vector center;   // quadratic and radial-shell; empty means the origin
  Matrix A;        // affine-norm; empty means identity
  Vector b;        // affine-norm; empty means zero
  std::map<int, Matrix> class_A;
  std::map<int, Vector> class_b;
  Vector w;        // linear and hinge
  double offset = 0.0;
  double radius = 0.0;
  int positive_label = 1;
  bool negate = false;  // hinge: use -y
};

enum class TermKind { target_distance, potential, interaction, entropy };
std::string_view term_kind_name(TermKind k);

struct Term {
  TermKind kind = TermKind::potential;
  double weight = 1.0;
  std::string name;  // label used in reports; derived from the kind when empty
  std::shared_ptr<const DatasetState> target;  // target-distance only
  OtddOptions otdd;
  PotentialParams potential;
  InteractionForm interaction = InteractionForm::class_repulsion;
};

struct FunctionalSpec {
  std::vector<Term> terms;

  bool has_target_distance() const;
  // Sum of entropy-term weights (the diffusion coefficient).
  double entropy_weight() const;
  // Unique display names, one per term.
  std::vector<std::string> term_names() const;
};

// Throws ConfigError on an empty spec, non-finite weights, a target-distance
// term without a target, or potential parameters of the wrong shape.
void validate_spec(const FunctionalSpec& spec, Eigen::Index dim);

double eval_potential(const DatasetState& state, const PotentialParams& p);
// Row i is grad V(z_i).
RowMatrix potential_grad(const DatasetState& state, const PotentialParams& p);

// 1/2 sum_ij p_i p_j W(z_i - z_j).
double eval_interaction(const DatasetState& state, InteractionForm form);
// Row i is sum_j p_j grad_x W(z_i - z_j), the gradient of the first variation.
RowMatrix interaction_grad(const DatasetState& state, InteractionForm form);

// Warm-start storage for the transport terms, one slot per term.
struct FunctionalWorkspace {
  std::vector<OtddWorkspace> otdd;
};

struct FunctionalValue {
  double value = 0.0;
  std::vector<double> term_values;
  FlowGradients grads;
};

// The target-distance term contributes the debiased entropic transport value
// (the squared dataset distance) and its gradients; the entropy term
// contributes nothing here and is realized as diffusion by the dynamics.
FunctionalValue grad_functional(const DatasetState& state, const FunctionalSpec& spec,
                                DynamicsMode mode, FunctionalWorkspace* workspace = nullptr);

// Value only; skips gradient assembly.
double eval_functional(const DatasetState& state, const FunctionalSpec& spec,
                       std::vector<double>* term_values = nullptr);

}  // namespace dsflow
