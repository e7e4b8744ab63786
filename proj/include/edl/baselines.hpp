#pragma once

#include "edl/data.hpp"
#include "edl/metrics.hpp"
#include "edl/trainer.hpp"
#include "edl/unet.hpp"

#include <cstdint>
#include <vector>

namespace edl::baselines {

/// -sum p_j ln p_j in nats, with 0 ln 0 = 0. Throws InvalidInput unless p is
/// a probability vector (components in [0, 1], sum within 1e-9 of 1).
double shannon_entropy(const Eigen::Ref<const Eigen::VectorXd>& p);

/// Per-pixel binary entropy of a foreground probability field.
Eigen::ArrayXd binary_entropy(const Eigen::ArrayXd& p_fg);

/// Softmax-head predictions with entropy uncertainty.
template <typename Scalar>
std::vector<metrics::SlicePrediction> predict_softmax(const nn::UNet<Scalar>& model, const data::Dataset& ds);

struct McDropoutSpec {
  int pass_count = 30;
  std::uint64_t seed = 0;
};

/// Mean and population standard deviation of the foreground probability over
/// `pass_count` passes with dropout active. Pass t uses stream_seed(seed, t).
template <typename Scalar>
std::vector<metrics::SlicePrediction> mc_dropout_predict(const nn::UNet<Scalar>& model, const data::Dataset& ds,
                                                         const McDropoutSpec& spec);

struct EnsembleSpec {
  int member_count = 5;
  std::vector<std::uint64_t> seeds;  ///< one per member; must be distinct

  /// `member_count` distinct seeds derived from `base`.
  static EnsembleSpec from_base(int member_count, std::uint64_t base);
  void validate() const;
};

/// Mean and population standard deviation of the members' foreground
/// probabilities (dropout off).
template <typename Scalar>
std::vector<metrics::SlicePrediction> ensemble_predict(const std::vector<const nn::UNet<Scalar>*>& members,
                                                       const data::Dataset& ds);

/// Softmax-head U-Net trained with plain soft Dice.
template <typename Scalar>
struct TrainedModel {
  nn::UNet<Scalar> model;
  std::vector<train::EpochRecord> history;
};

/// Forces the softmax head; everything else comes from `net` and `tc`.
template <typename Scalar>
TrainedModel<Scalar> train_baseline(nn::UNetConfig net, const train::TrainConfig& tc, const data::Dataset& train,
                                    const data::Dataset* val);

/// One baseline per seed; member m uses spec.seeds[m] for both the
/// initialization and the training stream.
template <typename Scalar>
std::vector<TrainedModel<Scalar>> train_ensemble(const EnsembleSpec& spec, nn::UNetConfig net,
                                                 train::TrainConfig tc, const data::Dataset& train,
                                                 const data::Dataset* val);

}  // namespace edl::baselines
