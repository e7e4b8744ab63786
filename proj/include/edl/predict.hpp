#pragma once

#include "edl/data.hpp"
#include "edl/metrics.hpp"
#include "edl/unet.hpp"

#include <cstdint>
#include <vector>

namespace edl::predict {

/// Head outputs for every sample, stacked as (pixels x 2) in dataset order.
/// Batches are formed from consecutive samples; with dropout active, batch b
/// draws its masks from stream_seed(seed, b).
template <typename Scalar>
Eigen::ArrayXXd head_outputs(const nn::UNet<Scalar>& model, const data::Dataset& ds, bool dropout_active = false,
                             std::uint64_t seed = 0, int batch_size = 16);

/// Splits stacked per-pixel fields back into per-sample predictions with the
/// foreground mask and probability filled in. `p_fg` is in dataset order.
std::vector<metrics::SlicePrediction> slices_from_probability(const data::Dataset& ds, const Eigen::ArrayXd& p_fg);

/// Evidential predictions: p = beta / S, class by the larger concentration,
/// and per-pixel Dempster, epistemic and aleatoric uncertainty. Throws
/// StateError for a softmax-head model.
template <typename Scalar>
std::vector<metrics::SlicePrediction> predict_edl(const nn::UNet<Scalar>& model, const data::Dataset& ds);

}  // namespace edl::predict
