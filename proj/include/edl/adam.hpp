#pragma once

#include "edl/error.hpp"
#include "edl/tensor.hpp"

#include <cmath>
#include <vector>

namespace edl::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct OptimizerState {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  long step = 0;
  double learning_rate = 1e-4;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// Bias-corrected Adam over every parameter of a ModelParams set.
template <typename Scalar>
class Adam {
 public:
  Adam(ModelParams<Scalar>& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
    state_.learning_rate = cfg.learning_rate;
    for (const auto& p : params.all()) {
      state_.first_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      state_.second_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }

  /// Applies one update from the accumulated gradients. Throws TrainingError
  /// naming the first parameter with a non-finite gradient; parameters are
  /// left untouched in that case.
  void step() {
    for (const auto& p : params_->all()) {
      if (!p.grad.allFinite()) throw TrainingError("non-finite gradient in parameter " + p.name);
    }
    ++state_.step;
    const double t = static_cast<double>(state_.step);
    const auto b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
    const auto c1 = static_cast<Scalar>(1.0 / (1.0 - std::pow(cfg_.beta1, t)));
    const auto c2 = static_cast<Scalar>(1.0 / (1.0 - std::pow(cfg_.beta2, t)));
    const auto lr = static_cast<Scalar>(state_.learning_rate), eps = static_cast<Scalar>(cfg_.epsilon);
    for (std::size_t i = 0; i < params_->size(); ++i) {
      auto& p = (*params_)[i];
      auto& m = state_.first_moment[i];
      auto& v = state_.second_moment[i];
      m = b1 * m + (Scalar(1) - b1) * p.grad;
      v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= lr * (c1 * m.array()) / ((c2 * v.array()).sqrt() + eps);
    }
  }

  const OptimizerState<Scalar>& state() const { return state_; }
  OptimizerState<Scalar>& state() { return state_; }

 private:
  using Matrix = typename OptimizerState<Scalar>::Matrix;
  ModelParams<Scalar>* params_;
  AdamConfig cfg_;
  OptimizerState<Scalar> state_;
};

}  // namespace edl::nn
