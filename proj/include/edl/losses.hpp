#pragma once

#include "edl/evidence.hpp"

#include <Eigen/Dense>

namespace edl::loss {

/// Per-pixel class fields: one row per pixel, one column per class.
using Field = Eigen::ArrayXXd;

struct LossWeights {
  double lambda_kl = 0.20;
  double lambda_dice = 0.15;

  void validate() const;

  static LossWeights cardiac() { return {0.20, 0.15}; }
  static LossWeights prostate() { return {0.20, 0.01}; }
};

struct LossBreakdown {
  double bayes = 0.0;
  double kl = 0.0;
  double dice = 0.0;
  double total = 0.0;
};

/// Which pixels the KL regularizer acts on. `transform` applies the
/// misleading-evidence transform at every pixel; `masked` additionally keeps
/// only pixels whose predicted class differs from the label.
enum class KlMode { transform, masked };

/// Smoothing added to the Dice denominator.
inline constexpr double kDiceEpsilon = 1e-7;

/// Mean over pixels of sum_j (y_j - p_j)^2 + p_j (1 - p_j) / (S + 1), with
/// p = alpha / S. When `grad` is given it receives d(loss)/d(alpha), which is
/// also the derivative with respect to the evidence.
double bayes_risk(const Field& alpha, const Field& y, Field* grad = nullptr);

/// alpha~_j = y_j + (1 - y_j) alpha_j: evidence for the labelled class is removed.
evidence::DirichletParams<double> misleading_alpha(const evidence::DirichletParams<double>& alpha,
                                                   const evidence::Vector<double>& y);
Field misleading_alpha(const Field& alpha, const Field& y);

/// KL(Dir(alpha~) || Dir(1, ..., 1)).
double kl_to_uniform(const evidence::DirichletParams<double>& alpha_tilde);

/// Mean over pixels of the KL term. `grad` receives d/d(alpha~).
double kl_to_uniform(const Field& alpha_tilde, Field* grad = nullptr);

/// 1 - ((2 mean(y_t y_p) + eps) / (mean(y_t + y_p) + eps))^exponent. The exponent is
/// 3 for the focal form and 1 for plain soft Dice. `grad` receives
/// d(loss)/d(y_p).
double focal_dice(const Eigen::ArrayXd& p_fg, const Eigen::ArrayXd& y_fg, double exponent = 3.0,
                  Eigen::ArrayXd* grad = nullptr);

/// bayes + lambda_kl * kl + lambda_dice * dice for a binary (K = 2) field.
/// Column 1 of alpha and y is the foreground. `grad_alpha` receives
/// d(total)/d(alpha).
LossBreakdown total_loss(const Field& alpha, const Field& y, const LossWeights& weights,
                         KlMode mode = KlMode::transform, Field* grad_alpha = nullptr);

}  // namespace edl::loss
