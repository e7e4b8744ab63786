#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. They use the standard library's generators and Boost
// quadrature on purpose, so they share no code with the library's RNG or
// closed forms.

#include "edl/graph.hpp"
#include "edl/losses.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

struct MeanSe {
  double mean;
  double se;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {m, sd / std::sqrt(static_cast<double>(v.size()))};
}

/// Draws from Dir(alpha) via normalized gamma variates.
inline std::vector<std::vector<double>> dirichlet_draws(const std::vector<double>& alpha, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<std::gamma_distribution<double>> g;
  for (double a : alpha) g.emplace_back(a, 1.0);
  std::vector<std::vector<double>> out(n, std::vector<double>(alpha.size()));
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) s += out[i][j] = g[j](gen);
    for (double& x : out[i]) x /= s;
  }
  return out;
}

/// KL(Beta(a, b) || Uniform) = integral of f log f over [0, 1].
inline double beta_kl_quadrature(double a, double b) {
  const double log_b = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  auto f = [&](double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double lf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_b;
    return std::exp(lf) * lf;
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, 0.0, 1.0, 1e-10);
}

/// Relative difference with a small absolute floor on the denominator so that
/// gradients that are zero in both computations compare as equal.
inline double rel_err(double a, double b) {
  const double d = std::max({std::abs(a), std::abs(b), 1e-7});
  return std::abs(a - b) / d;
}

/// Tiny evidential network: conv3x3(1->3) -> relu -> conv1x1(3->2) -> softplus,
/// on a 2x1x4x4 input. Owns its parameters so tests can perturb them.
struct TinyNet {
  using M = Eigen::MatrixXd;
  edl::nn::ModelParams<double> params;
  edl::nn::TensorXd x;
  Eigen::ArrayXXd y;
  edl::loss::LossWeights weights{0.20, 0.15};
  edl::loss::KlMode mode = edl::loss::KlMode::transform;

  explicit TinyNet(std::uint64_t seed) : x(2, 1, 4, 4) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto fill = [&](edl::nn::Parameter<double>& p, double scale) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = scale * u(gen);
    };
    fill(params.add("c0.w", {3, 1, 3, 3}, 9, 3), 0.8);
    fill(params.add("c0.b", {3}, 3, 1), 0.3);
    fill(params.add("c1.w", {2, 3, 1, 1}, 3, 2), 0.8);
    fill(params.add("c1.b", {2}, 2, 1), 0.3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.mat().data()[i] = u(gen);
    y = Eigen::ArrayXXd::Zero(x.pixels(), 2);
    for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, (gen() & 1) ? 1 : 0) = 1.0;
  }

  /// Composite loss; when `with_grad`, parameter gradients are left in params.
  double loss(bool with_grad) {
    edl::nn::Graph<double> g;
    auto in = g.input(x);
    auto h = g.relu(g.conv2d(in, params[0], params[1], 3));
    auto e = g.softplus(g.conv2d(h, params[2], params[3], 1));
    const Eigen::ArrayXXd alpha = g.value(e).mat().array() + 1.0;
    Eigen::ArrayXXd grad;
    const auto br = edl::loss::total_loss(alpha, y, weights, mode, with_grad ? &grad : nullptr);
    if (with_grad) {
      params.zero_grad();
      g.backward(e, edl::nn::TensorXd(x.batch(), x.height(), x.width(), grad.matrix()));
    }
    return br.total;
  }
};

/// Textbook two-pass Pearson correlation.
inline double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// 1-based ranks, ties get the average of the positions they span. Quadratic
/// on purpose: counts smaller and equal values directly.
inline std::vector<double> brute_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) less += v < x[i], equal += v == x[i];
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

/// sup |F_a - F_b| by counting at every sample point.
inline double brute_ks(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  double best = 0.0;
  for (double t : pts) {
    double fa = 0, fb = 0;
    for (double v : a) fa += v <= t;
    for (double v : b) fb += v <= t;
    best = std::max(best, std::abs(fa / a.size() - fb / b.size()));
  }
  return best;
}

}  // namespace oracle
