#include "edl/trainer.hpp"

#include "edl/error.hpp"
#include "edl/metrics.hpp"
#include "edl/predict.hpp"
#include "edl/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace edl::train {

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidInput("epochs must be non-negative");
  if (batch_size < 1) throw InvalidInput("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidInput("learning_rate must be positive");
  weights.validate();
}

template <typename Scalar>
loss::LossBreakdown objective(nn::Head head, const nn::Tensor<Scalar>& output, const Eigen::ArrayXXd& labels,
                              const loss::LossWeights& weights, loss::KlMode mode, nn::Tensor<Scalar>* grad) {
  if (output.channels() != 2 || output.pixels() != labels.rows() || labels.cols() != 2)
    throw InvalidInput("objective: output " + output.shape_string() + " does not match labels");
  const Eigen::ArrayXXd out = output.mat().array().template cast<double>();
  loss::LossBreakdown br;
  Eigen::ArrayXXd g;
  if (head == nn::Head::evidential) {
    br = loss::total_loss(out + 1.0, labels, weights, mode, grad != nullptr ? &g : nullptr);
  } else {
    Eigen::ArrayXd gd;
    br.dice = loss::focal_dice(out.col(1), labels.col(1), 1.0, grad != nullptr ? &gd : nullptr);
    br.total = br.dice;
    if (grad != nullptr) {
      g = Eigen::ArrayXXd::Zero(out.rows(), 2);
      g.col(1) = gd;
    }
  }
  if (grad != nullptr)
    *grad = nn::Tensor<Scalar>(output.batch(), output.height(), output.width(),
                               g.matrix().template cast<Scalar>());
  return br;
}

template <typename Scalar>
Trainer<Scalar>::Trainer(nn::UNet<Scalar>& model, TrainConfig cfg)
    : model_(&model), cfg_(cfg), adam_(model.params(), nn::AdamConfig{cfg.learning_rate}) {
  cfg_.validate();
}

template <typename Scalar>
EpochRecord Trainer<Scalar>::run_epoch(const data::Dataset& train, const data::Dataset* val) {
  if (train.empty()) throw InvalidInput("training set is empty");
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 shuffle(stream_seed(cfg_.seed, static_cast<std::uint64_t>(epoch_)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

  EpochRecord rec;
  rec.epoch = epoch_;
  const std::uint64_t dropout_base = stream_seed(cfg_.seed, 0xD50F'0000ULL + static_cast<std::uint64_t>(epoch_));
  std::size_t b = 0;
  for (std::size_t start = 0; start < n; start += cfg_.batch_size, ++b) {
    const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg_.batch_size));
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    const auto x = data::stack_images<Scalar>(train, idx);
    const Eigen::ArrayXXd y = data::stack_labels(train, idx);

    const auto out = model_->forward(x, true, stream_seed(dropout_base, b));
    nn::Tensor<Scalar> g;
    const auto br = objective(model_->config().head, out, y, cfg_.weights, cfg_.kl_mode, &g);
    if (!std::isfinite(br.total)) throw TrainingError("non-finite loss at epoch " + std::to_string(epoch_));
    model_->params().zero_grad();
    model_->backward(g);
    adam_.step();

    const double w = static_cast<double>(idx.size()) / static_cast<double>(n);
    rec.bayes += w * br.bayes;
    rec.kl += w * br.kl;
    rec.dice += w * br.dice;
    rec.total += w * br.total;
  }
  rec.val_dice = val != nullptr && !val->empty() ? mean_dice(*model_, *val) : std::numeric_limits<double>::quiet_NaN();
  ++epoch_;
  return rec;
}

template <typename Scalar>
std::vector<EpochRecord> Trainer<Scalar>::fit(const data::Dataset& train, const data::Dataset* val, int epochs) {
  if (epochs < 0) throw InvalidInput("epochs must be non-negative");
  std::vector<EpochRecord> history;
  history.reserve(epochs);
  for (int e = 0; e < epochs; ++e) history.push_back(run_epoch(train, val));
  return history;
}

template <typename Scalar>
double mean_dice(const nn::UNet<Scalar>& model, const data::Dataset& ds) {
  const Eigen::ArrayXXd out = predict::head_outputs(model, ds);
  const Eigen::Index plane = ds.front().mask.size();
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto rows = out.middleRows(static_cast<Eigen::Index>(i) * plane, plane);
    // Both heads: foreground wins only when its output strictly exceeds
    // the background output.
    const metrics::BinaryField pred = (rows.col(1) > rows.col(0)).template cast<std::uint8_t>();
    total += metrics::dice(pred, Eigen::Map<const metrics::BinaryField>(ds[i].mask.data(), plane));
  }
  return total / static_cast<double>(ds.size());
}

template class Trainer<float>;
template class Trainer<double>;
template double mean_dice(const nn::UNet<float>&, const data::Dataset&);
template double mean_dice(const nn::UNet<double>&, const data::Dataset&);
template loss::LossBreakdown objective(nn::Head, const nn::Tensor<float>&, const Eigen::ArrayXXd&,
                                       const loss::LossWeights&, loss::KlMode, nn::Tensor<float>*);
template loss::LossBreakdown objective(nn::Head, const nn::Tensor<double>&, const Eigen::ArrayXXd&,
                                       const loss::LossWeights&, loss::KlMode, nn::Tensor<double>*);

}  // namespace edl::train
