#pragma once

#include "edl/adam.hpp"
#include "edl/data.hpp"
#include "edl/losses.hpp"
#include "edl/unet.hpp"

#include <cstdint>
#include <vector>

namespace edl::train {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 8;
  double learning_rate = 1e-4;
  loss::LossWeights weights = loss::LossWeights::cardiac();
  loss::KlMode kl_mode = loss::KlMode::transform;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Loss components are sample-weighted means over the epoch's batches. For
/// the softmax head only `dice` (plain soft Dice) and `total` are non-zero.
struct EpochRecord {
  int epoch = 0;
  double bayes = 0.0;
  double kl = 0.0;
  double dice = 0.0;
  double total = 0.0;
  double val_dice = 0.0;  ///< mean per-slice Dice; NaN without a validation set
};

/// Training objective for one batch of head outputs. `grad` receives
/// d(loss)/d(output) in the output's layout. Evidential heads use the
/// composite evidential loss on alpha = e + 1; softmax heads use soft Dice
/// (exponent 1) on the foreground probability.
template <typename Scalar>
loss::LossBreakdown objective(nn::Head head, const nn::Tensor<Scalar>& output, const Eigen::ArrayXXd& labels,
                              const loss::LossWeights& weights, loss::KlMode mode, nn::Tensor<Scalar>* grad);

/// Mini-batch Adam trainer. The optimizer state lives as long as the trainer,
/// so repeated fit() calls continue from the current weights and moments.
template <typename Scalar>
class Trainer {
 public:
  Trainer(nn::UNet<Scalar>& model, TrainConfig cfg);

  /// One pass over `train` in a seeded order. `val` may be null.
  EpochRecord run_epoch(const data::Dataset& train, const data::Dataset* val);
  std::vector<EpochRecord> fit(const data::Dataset& train, const data::Dataset* val, int epochs);
  std::vector<EpochRecord> fit(const data::Dataset& train, const data::Dataset* val) {
    return fit(train, val, cfg_.epochs);
  }

  int epochs_run() const { return epoch_; }
  long steps() const { return adam_.state().step; }
  const TrainConfig& config() const { return cfg_; }

 private:
  nn::UNet<Scalar>* model_;
  TrainConfig cfg_;
  nn::Adam<Scalar> adam_;
  int epoch_ = 0;
};

extern template class Trainer<float>;
extern template class Trainer<double>;

/// Mean per-slice Dice of the thresholded predictions (dropout off).
template <typename Scalar>
double mean_dice(const nn::UNet<Scalar>& model, const data::Dataset& ds);

}  // namespace edl::train
