#include "edl/predict.hpp"

#include "edl/error.hpp"
#include "edl/evidence.hpp"
#include "edl/rng.hpp"

#include <numeric>

namespace edl::predict {

template <typename Scalar>
Eigen::ArrayXXd head_outputs(const nn::UNet<Scalar>& model, const data::Dataset& ds, bool dropout_active,
                             std::uint64_t seed, int batch_size) {
  if (ds.empty()) throw InvalidInput("cannot predict on an empty dataset");
  if (batch_size < 1) throw InvalidInput("batch size must be positive");
  const Eigen::Index plane = ds.front().mask.size();
  Eigen::ArrayXXd out(static_cast<Eigen::Index>(ds.size()) * plane, 2);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0, b = 0; start < ds.size(); start += batch_size, ++b) {
    const std::size_t end = std::min(ds.size(), start + static_cast<std::size_t>(batch_size));
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto x = data::stack_images<Scalar>(ds, idx);
    const auto y = model.predict(x, dropout_active, stream_seed(seed, b));
    out.middleRows(static_cast<Eigen::Index>(start) * plane, y.pixels()) = y.mat().array().template cast<double>();
  }
  return out;
}

std::vector<metrics::SlicePrediction> slices_from_probability(const data::Dataset& ds, const Eigen::ArrayXd& p_fg) {
  const Eigen::Index plane = ds.empty() ? 0 : ds.front().mask.size();
  if (p_fg.size() != static_cast<Eigen::Index>(ds.size()) * plane)
    throw InvalidInput("probability field does not match dataset size");
  std::vector<metrics::SlicePrediction> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& s = out[i];
    s.id = ds[i].id;
    s.p_fg = p_fg.segment(static_cast<Eigen::Index>(i) * plane, plane);
    s.truth = Eigen::Map<const metrics::BinaryField>(ds[i].mask.data(), plane);
    s.pred = (s.p_fg > 0.5).cast<std::uint8_t>();
  }
  return out;
}

template <typename Scalar>
std::vector<metrics::SlicePrediction> predict_edl(const nn::UNet<Scalar>& model, const data::Dataset& ds) {
  if (model.config().head != nn::Head::evidential) throw StateError("predict_edl needs an evidential-head model");
  const Eigen::ArrayXXd e = head_outputs(model, ds);
  const Eigen::ArrayXd a = e.col(0) + 1.0, b = e.col(1) + 1.0;
  const Eigen::ArrayXd p = evidence::binary_foreground_probability(a, b);
  auto out = slices_from_probability(ds, p);
  const Eigen::ArrayXd ud = evidence::binary_dempster(a, b);
  const Eigen::ArrayXd ue = evidence::binary_epistemic(a, b);
  const Eigen::ArrayXd ua = evidence::binary_aleatoric(a, b);
  const Eigen::Index plane = ds.front().mask.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& s = out[i];
    const Eigen::Index off = static_cast<Eigen::Index>(i) * plane;
    // Class decision compares the concentrations directly so exact ties go
    // to the background.
    s.pred = (b.segment(off, plane) > a.segment(off, plane)).cast<std::uint8_t>();
    s.uncertainty[metrics::UncertaintyKind::dempster] = ud.segment(off, plane);
    s.uncertainty[metrics::UncertaintyKind::epistemic] = ue.segment(off, plane);
    s.uncertainty[metrics::UncertaintyKind::aleatoric] = ua.segment(off, plane);
  }
  return out;
}

template Eigen::ArrayXXd head_outputs(const nn::UNet<float>&, const data::Dataset&, bool, std::uint64_t, int);
template Eigen::ArrayXXd head_outputs(const nn::UNet<double>&, const data::Dataset&, bool, std::uint64_t, int);
template std::vector<metrics::SlicePrediction> predict_edl(const nn::UNet<float>&, const data::Dataset&);
template std::vector<metrics::SlicePrediction> predict_edl(const nn::UNet<double>&, const data::Dataset&);

}  // namespace edl::predict
