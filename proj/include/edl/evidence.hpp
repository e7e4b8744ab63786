#pragma once

#include "edl/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace edl::evidence {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dirichlet concentration vector. Always built from evidence (alpha = e + 1)
/// or from an explicit alpha that is checked to satisfy alpha_j >= 1; the
/// precision S is recomputed on demand.
template <typename Scalar = double>
class DirichletParams {
 public:
  /// Throws InvalidInput unless K >= 2 and every alpha_j >= 1 and finite.
  static DirichletParams from_alpha(Vector<Scalar> alpha) {
    if (alpha.size() < 2) throw InvalidInput("Dirichlet needs at least two classes");
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
      if (!std::isfinite(alpha[j]) || alpha[j] < Scalar(1)) {
        throw InvalidInput("Dirichlet alpha must be finite and >= 1 (alpha[" + std::to_string(j) +
                           "] = " + std::to_string(static_cast<double>(alpha[j])) + ")");
      }
    }
    return DirichletParams(std::move(alpha));
  }

  const Vector<Scalar>& alpha() const { return alpha_; }
  Scalar alpha(Eigen::Index j) const { return alpha_[j]; }
  Eigen::Index classes() const { return alpha_.size(); }
  Scalar precision() const { return alpha_.sum(); }

 private:
  explicit DirichletParams(Vector<Scalar> alpha) : alpha_(std::move(alpha)) {}
  Vector<Scalar> alpha_;
};

template <typename Scalar = double>
struct UncertaintyTriad {
  Scalar aleatoric;  ///< E[p_i (1 - p_i)]
  Scalar epistemic;  ///< Var[p_i]
  Scalar dempster;   ///< K / S
};

template <typename Scalar = double>
struct BeliefMasses {
  Vector<Scalar> belief;
  Scalar dempster;
};

/// alpha_j = e_j + 1. Throws InvalidInput on negative or non-finite evidence.
template <typename Derived>
DirichletParams<typename Derived::Scalar> dirichlet_from_evidence(const Eigen::MatrixBase<Derived>& evidence) {
  using Scalar = typename Derived::Scalar;
  for (Eigen::Index j = 0; j < evidence.size(); ++j) {
    if (!std::isfinite(evidence(j)) || evidence(j) < Scalar(0)) {
      throw InvalidInput("evidence must be finite and non-negative (e[" + std::to_string(j) +
                         "] = " + std::to_string(static_cast<double>(evidence(j))) + ")");
    }
  }
  Vector<Scalar> alpha = evidence.derived().template cast<Scalar>();
  alpha.array() += Scalar(1);
  return DirichletParams<Scalar>::from_alpha(std::move(alpha));
}

/// Mean class probabilities alpha_k / S.
template <typename Scalar>
Vector<Scalar> mean_probabilities(const DirichletParams<Scalar>& d) {
  return d.alpha() / d.precision();
}

/// Per-class aleatoric and epistemic uncertainty plus the Dempster vacuity.
template <typename Scalar>
UncertaintyTriad<Scalar> uncertainty_triad(const DirichletParams<Scalar>& d, Eigen::Index class_index) {
  if (class_index < 0 || class_index >= d.classes()) {
    throw InvalidInput("class index " + std::to_string(class_index) + " out of range for K = " +
                       std::to_string(d.classes()));
  }
  const Scalar s = d.precision();
  const Scalar a = d.alpha(class_index);
  const Scalar num = a * (s - a);
  const Scalar aleatoric = num / (s * (s + Scalar(1)));
  return {aleatoric, aleatoric / s, static_cast<Scalar>(d.classes()) / s};
}

/// b_j = (alpha_j - 1) / S, u_d = K / S; u_d + sum_j b_j = 1.
template <typename Scalar>
BeliefMasses<Scalar> belief_masses(const DirichletParams<Scalar>& d) {
  const Scalar s = d.precision();
  Vector<Scalar> b = (d.alpha().array() - Scalar(1)) / s;
  return {std::move(b), static_cast<Scalar>(d.classes()) / s};
}

/// Arg-max of the mean probabilities; exact ties go to the lower index.
template <typename Scalar>
Eigen::Index predict_class(const DirichletParams<Scalar>& d) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < d.classes(); ++j)
    if (d.alpha(j) > d.alpha(best)) best = j;
  return best;
}

// Binary per-pixel forms. `alpha` is the background concentration and `beta`
// the foreground one; both are array expressions of equal shape.

template <typename A, typename B>
auto binary_aleatoric(const Eigen::ArrayBase<A>& alpha, const Eigen::ArrayBase<B>& beta) {
  using S = typename A::Scalar;
  return (alpha * beta) / ((alpha + beta) * (alpha + beta + S(1)));
}

template <typename A, typename B>
auto binary_epistemic(const Eigen::ArrayBase<A>& alpha, const Eigen::ArrayBase<B>& beta) {
  using S = typename A::Scalar;
  return (alpha * beta) / ((alpha + beta).square() * (alpha + beta + S(1)));
}

template <typename A, typename B>
auto binary_dempster(const Eigen::ArrayBase<A>& alpha, const Eigen::ArrayBase<B>& beta) {
  using S = typename A::Scalar;
  return S(2) * (alpha + beta).inverse();
}

template <typename A, typename B>
auto binary_foreground_probability(const Eigen::ArrayBase<A>& alpha, const Eigen::ArrayBase<B>& beta) {
  return beta / (alpha + beta);
}

}  // namespace edl::evidence
