#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "speccompact/features.hpp"

namespace speccompact {

enum class KernelKind { Linear, Rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  /// RBF width. Unset means 1 / (dim * Var(X)) over the training features,
  /// resolved at training time.
  std::optional<double> gamma;

  static KernelSpec linear() { return {KernelKind::Linear, std::nullopt}; }
  static KernelSpec rbf(std::optional<double> gamma = std::nullopt) {
    return {KernelKind::Rbf, gamma};
  }
  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

struct Hyperparams {
  KernelSpec kernel = KernelSpec::rbf();
  double c = 10.0;
  /// Reporting threshold on |y - f(x)|; not part of the training loss.
  double epsilon = 0.1;
  /// Stop when the maximal KKT violation drops below this.
  double kkt_tol = 1e-3;
  /// Iteration budget, in units of the training-set size.
  std::size_t max_passes = 100;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

void validate(const Hyperparams& hp);

/// Outcome of the dual solve for one training set.
struct SolverState {
  std::vector<double> alphas;
  double bias = 0.0;
  /// Hinge slacks xi_k = max(0, 1 - y_k f(x_k)).
  std::vector<double> slacks;
  /// Dual objective sum(alpha) - 1/2 alpha' Q alpha (maximization form).
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Maximal KKT violation at exit.
  double kkt_gap = 0.0;
  /// Resolved kernel (gamma filled in).
  KernelSpec kernel;
};

struct TrainingMeta {
  Hyperparams hyperparams;
  std::size_t n_train = 0;
  std::size_t n_positive = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  bool converged = true;

  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

/// Trained soft-margin classifier: f(x) = sum_k coef_k K(sv_k, x) + bias.
struct SvcModel {
  FeatureMatrix support_vectors;
  std::vector<double> coefficients;  // alpha_k * y_k
  double bias = 0.0;
  KernelSpec kernel;
  TrainingMeta meta;

  std::size_t dim() const noexcept { return support_vectors.dim(); }
};

double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> z);

/// Solves the soft-margin dual with SMO. Working pair: the maximal KKT
/// violator i, paired with the j that maximizes |E_i - E_j| among violating
/// partners; ties go to the lowest index.
SolverState solve_dual(const FeatureMatrix& features, std::span<const Label> labels,
                       const Hyperparams& hp);

/// Throws DegenerateLabels (single class), DimensionMismatch, LengthMismatch.
/// A model whose solve hit the iteration budget is returned with
/// meta.converged == false.
SvcModel train_svc(const FeatureMatrix& features, std::span<const Label> labels,
                   const Hyperparams& hp, std::uint64_t seed = 0);

double decision_value(const SvcModel& m, std::span<const double> x);
/// Sign of the decision value; exactly zero maps to Pass.
Label predict(const SvcModel& m, std::span<const double> x);
/// e_m = y - f(x).
double model_error(const SvcModel& m, std::span<const double> x, Label y);

double dual_objective(const FeatureMatrix& features, std::span<const Label> labels,
                      const KernelSpec& kernel, std::span<const double> alphas);

void to_json(nlohmann::json& j, const Hyperparams& hp);
void from_json(const nlohmann::json& j, Hyperparams& hp);
void to_json(nlohmann::json& j, const SvcModel& m);
void from_json(const nlohmann::json& j, SvcModel& m);

}  // namespace speccompact
