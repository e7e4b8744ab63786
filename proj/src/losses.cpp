#include "edl/losses.hpp"

#include "edl/error.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <cmath>

namespace edl::loss {
namespace {

void check_fields(const Field& alpha, const Field& y) {
  if (alpha.rows() != y.rows() || alpha.cols() != y.cols()) {
    throw InvalidInput("loss: alpha field is " + std::to_string(alpha.rows()) + "x" + std::to_string(alpha.cols()) +
                       " but labels are " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  }
  if (alpha.rows() == 0) throw InvalidInput("loss: empty field");
  if (alpha.cols() < 2) throw InvalidInput("loss: need at least two classes");
}

double kl_pixel(const double* a, Eigen::Index k, Eigen::Index stride, double* grad) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) s += a[j * stride];
  const double psi_s = boost::math::digamma(s);
  double value = std::lgamma(s) - std::lgamma(static_cast<double>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const double aj = a[j * stride];
    value += -std::lgamma(aj) + (aj - 1.0) * (boost::math::digamma(aj) - psi_s);
  }
  if (grad != nullptr) {
    const double tri_s = boost::math::trigamma(s);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double aj = a[j * stride];
      grad[j * stride] = (aj - 1.0) * boost::math::trigamma(aj) - tri_s * (s - static_cast<double>(k));
    }
  }
  return value;
}

}  // namespace

void LossWeights::validate() const {
  if (!std::isfinite(lambda_kl) || !std::isfinite(lambda_dice) || lambda_kl < 0.0 || lambda_dice < 0.0) {
    throw InvalidInput("loss weights must be finite and non-negative");
  }
}

double bayes_risk(const Field& alpha, const Field& y, Field* grad) {
  check_fields(alpha, y);
  const Eigen::ArrayXd s = alpha.rowwise().sum();
  const Field p = alpha.colwise() / s;
  const Field var_term = (p * (1.0 - p)).colwise() / (s + 1.0);
  const double n = static_cast<double>(alpha.rows());
  const double value = ((y - p).square() + var_term).sum() / n;
  if (grad != nullptr) {
    // dL/dp_j = -2 (y_j - p_j) + (1 - 2 p_j)/(S+1); dp_j/dalpha_k = (delta_jk - p_j)/S;
    // the variance term also depends on S directly.
    const Field dp = -2.0 * (y - p) + (1.0 - 2.0 * p).colwise() / (s + 1.0);
    const Eigen::ArrayXd dp_dot_p = (dp * p).rowwise().sum();
    const Eigen::ArrayXd direct = var_term.rowwise().sum() / (s + 1.0);
    *grad = ((dp.colwise() - dp_dot_p).colwise() / s).colwise() - direct;
    *grad /= n;
  }
  return value;
}

evidence::DirichletParams<double> misleading_alpha(const evidence::DirichletParams<double>& alpha,
                                                   const evidence::Vector<double>& y) {
  if (y.size() != alpha.classes()) throw InvalidInput("misleading_alpha: label length does not match K");
  evidence::Vector<double> out = y.array() + (1.0 - y.array()) * alpha.alpha().array();
  return evidence::DirichletParams<double>::from_alpha(std::move(out));
}

Field misleading_alpha(const Field& alpha, const Field& y) {
  check_fields(alpha, y);
  return y + (1.0 - y) * alpha;
}

double kl_to_uniform(const evidence::DirichletParams<double>& alpha_tilde) {
  return kl_pixel(alpha_tilde.alpha().data(), alpha_tilde.classes(), 1, nullptr);
}

double kl_to_uniform(const Field& alpha_tilde, Field* grad) {
  if (alpha_tilde.rows() == 0) throw InvalidInput("kl_to_uniform: empty field");
  if (!(alpha_tilde >= 1.0).all()) throw InvalidInput("kl_to_uniform: alpha~ must be >= 1");
  const Eigen::Index n = alpha_tilde.rows(), k = alpha_tilde.cols();
  if (grad != nullptr) grad->resize(n, k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += kl_pixel(alpha_tilde.data() + i, k, n, grad != nullptr ? grad->data() + i : nullptr);
  }
  if (grad != nullptr) *grad /= static_cast<double>(n);
  return total / static_cast<double>(n);
}

double focal_dice(const Eigen::ArrayXd& p_fg, const Eigen::ArrayXd& y_fg, double exponent, Eigen::ArrayXd* grad) {
  if (p_fg.size() == 0) throw InvalidInput("focal_dice: empty field");
  if (p_fg.size() != y_fg.size()) throw InvalidInput("focal_dice: size mismatch");
  const double n = static_cast<double>(p_fg.size());
  // Smoothing on both sides so two empty masks score a perfect ratio of 1.
  const double numer = 2.0 * (y_fg * p_fg).sum() / n + kDiceEpsilon;
  const double denom = (y_fg + p_fg).sum() / n + kDiceEpsilon;
  const double ratio = numer / denom;
  if (grad != nullptr) {
    // d ratio / d p_i = (2 y_i / denom - numer / denom^2) / n
    const Eigen::ArrayXd dratio = (2.0 * y_fg / denom - numer / (denom * denom)) / n;
    *grad = -exponent * std::pow(ratio, exponent - 1.0) * dratio;
  }
  return 1.0 - std::pow(ratio, exponent);
}

LossBreakdown total_loss(const Field& alpha, const Field& y, const LossWeights& weights, KlMode mode,
                         Field* grad_alpha) {
  check_fields(alpha, y);
  weights.validate();
  if (alpha.cols() != 2) throw InvalidInput("total_loss: binary fields required");
  LossBreakdown out;
  Field g_bayes;
  out.bayes = bayes_risk(alpha, y, grad_alpha != nullptr ? &g_bayes : nullptr);

  Field tilde = misleading_alpha(alpha, y);
  Eigen::ArrayXd keep = Eigen::ArrayXd::Ones(alpha.rows());
  if (mode == KlMode::masked) {
    // Predicted class 1 iff alpha_fg > alpha_bg (ties go to background).
    const Eigen::ArrayXd pred_fg = (alpha.col(1) > alpha.col(0)).cast<double>();
    keep = (pred_fg != y.col(1)).cast<double>();
    tilde = (tilde.colwise() * keep).colwise() + (1.0 - keep);
  }
  Field g_kl;
  out.kl = kl_to_uniform(tilde, grad_alpha != nullptr ? &g_kl : nullptr);

  const Eigen::ArrayXd s = alpha.rowwise().sum();
  const Eigen::ArrayXd p_fg = alpha.col(1) / s;
  Eigen::ArrayXd g_dice;
  out.dice = focal_dice(p_fg, y.col(1), 3.0, grad_alpha != nullptr ? &g_dice : nullptr);

  out.total = out.bayes + weights.lambda_kl * out.kl + weights.lambda_dice * out.dice;

  if (grad_alpha != nullptr) {
    Field g = g_bayes;
    // d alpha~ / d alpha = (1 - y), zero where the mask drops the pixel.
    g += weights.lambda_kl * ((g_kl * (1.0 - y)).colwise() * keep);
    // p_fg = alpha_1 / S: d/d alpha_0 = -alpha_1/S^2, d/d alpha_1 = alpha_0/S^2.
    const Eigen::ArrayXd s2 = s.square();
    g.col(0) += weights.lambda_dice * g_dice * (-alpha.col(1) / s2);
    g.col(1) += weights.lambda_dice * g_dice * (alpha.col(0) / s2);
    *grad_alpha = std::move(g);
  }
  return out;
}

}  // namespace edl::loss
