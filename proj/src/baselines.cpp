#include "edl/baselines.hpp"

#include "edl/error.hpp"
#include "edl/predict.hpp"
#include "edl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace edl::baselines {

double shannon_entropy(const Eigen::Ref<const Eigen::VectorXd>& p) {
  if (p.size() == 0) throw InvalidInput("shannon_entropy: empty probability vector");
  double sum = 0.0, h = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (!(p[j] >= 0.0 && p[j] <= 1.0)) throw InvalidInput("shannon_entropy: component outside [0, 1]");
    sum += p[j];
    if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("shannon_entropy: components do not sum to 1");
  return h;
}

Eigen::ArrayXd binary_entropy(const Eigen::ArrayXd& p_fg) {
  Eigen::ArrayXd h(p_fg.size());
  for (Eigen::Index i = 0; i < p_fg.size(); ++i) {
    const double p = std::clamp(p_fg[i], 0.0, 1.0), q = 1.0 - p;
    h[i] = (p > 0.0 ? -p * std::log(p) : 0.0) + (q > 0.0 ? -q * std::log(q) : 0.0);
  }
  return h;
}

namespace {

template <typename Scalar>
void require_softmax(const nn::UNet<Scalar>& model, const char* what) {
  if (model.config().head != nn::Head::softmax) throw StateError(std::string(what) + " needs a softmax-head model");
}

/// Attaches the population std of `samples` (one column per pass/member) as
/// the stddev uncertainty, with predictions from the mean.
std::vector<metrics::SlicePrediction> from_samples(const data::Dataset& ds, const Eigen::ArrayXXd& samples) {
  const Eigen::ArrayXd mean = samples.rowwise().mean();
  const Eigen::ArrayXd sd = (samples.colwise() - mean).square().rowwise().mean().sqrt();
  auto out = predict::slices_from_probability(ds, mean);
  const Eigen::Index plane = ds.front().mask.size();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].uncertainty[metrics::UncertaintyKind::stddev] = sd.segment(static_cast<Eigen::Index>(i) * plane, plane);
  return out;
}

}  // namespace

template <typename Scalar>
std::vector<metrics::SlicePrediction> predict_softmax(const nn::UNet<Scalar>& model, const data::Dataset& ds) {
  require_softmax(model, "predict_softmax");
  const Eigen::ArrayXd p = predict::head_outputs(model, ds).col(1);
  auto out = predict::slices_from_probability(ds, p);
  const Eigen::ArrayXd h = binary_entropy(p);
  const Eigen::Index plane = ds.front().mask.size();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].uncertainty[metrics::UncertaintyKind::entropy] = h.segment(static_cast<Eigen::Index>(i) * plane, plane);
  return out;
}

template <typename Scalar>
std::vector<metrics::SlicePrediction> mc_dropout_predict(const nn::UNet<Scalar>& model, const data::Dataset& ds,
                                                         const McDropoutSpec& spec) {
  require_softmax(model, "mc_dropout_predict");
  if (spec.pass_count < 1) throw InvalidInput("MC Dropout needs at least one pass");
  if (ds.empty()) throw InvalidInput("cannot predict on an empty dataset");
  const Eigen::Index rows = static_cast<Eigen::Index>(ds.size()) * ds.front().mask.size();
  Eigen::ArrayXXd samples(rows, spec.pass_count);
  for (int t = 0; t < spec.pass_count; ++t)
    samples.col(t) = predict::head_outputs(model, ds, true, stream_seed(spec.seed, static_cast<std::uint64_t>(t))).col(1);
  return from_samples(ds, samples);
}

EnsembleSpec EnsembleSpec::from_base(int member_count, std::uint64_t base) {
  EnsembleSpec s;
  s.member_count = member_count;
  for (int m = 0; m < member_count; ++m) s.seeds.push_back(stream_seed(base, static_cast<std::uint64_t>(m)));
  return s;
}

void EnsembleSpec::validate() const {
  if (member_count < 1) throw InvalidInput("ensemble needs at least one member");
  if (seeds.size() != static_cast<std::size_t>(member_count))
    throw InvalidInput("ensemble seed list length differs from member count");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw InvalidInput("ensemble seeds must be distinct");
}

template <typename Scalar>
std::vector<metrics::SlicePrediction> ensemble_predict(const std::vector<const nn::UNet<Scalar>*>& members,
                                                       const data::Dataset& ds) {
  if (members.empty()) throw InvalidInput("ensemble has no members");
  if (ds.empty()) throw InvalidInput("cannot predict on an empty dataset");
  const auto& c0 = members.front()->config();
  for (const auto* m : members) {
    require_softmax(*m, "ensemble_predict");
    const auto& c = m->config();
    if (c.input_channels != c0.input_channels || c.image_size != c0.image_size)
      throw InvalidInput("ensemble members differ in input shape");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(ds.size()) * ds.front().mask.size();
  Eigen::ArrayXXd samples(rows, static_cast<Eigen::Index>(members.size()));
  for (std::size_t m = 0; m < members.size(); ++m) samples.col(m) = predict::head_outputs(*members[m], ds).col(1);
  return from_samples(ds, samples);
}

template <typename Scalar>
TrainedModel<Scalar> train_baseline(nn::UNetConfig net, const train::TrainConfig& tc, const data::Dataset& train,
                                    const data::Dataset* val) {
  net.head = nn::Head::softmax;
  TrainedModel<Scalar> out{nn::UNet<Scalar>(net), {}};
  train::Trainer<Scalar> trainer(out.model, tc);
  out.history = trainer.fit(train, val);
  return out;
}

template <typename Scalar>
std::vector<TrainedModel<Scalar>> train_ensemble(const EnsembleSpec& spec, nn::UNetConfig net,
                                                 train::TrainConfig tc, const data::Dataset& train,
                                                 const data::Dataset* val) {
  spec.validate();
  std::vector<TrainedModel<Scalar>> members;
  members.reserve(spec.seeds.size());
  for (std::uint64_t seed : spec.seeds) {
    net.seed = seed;
    tc.seed = seed;
    members.push_back(train_baseline<Scalar>(net, tc, train, val));
  }
  return members;
}

#define EDL_INSTANTIATE(S)                                                                                        \
  template std::vector<metrics::SlicePrediction> predict_softmax(const nn::UNet<S>&, const data::Dataset&);      \
  template std::vector<metrics::SlicePrediction> mc_dropout_predict(const nn::UNet<S>&, const data::Dataset&,    \
                                                                    const McDropoutSpec&);                       \
  template std::vector<metrics::SlicePrediction> ensemble_predict(const std::vector<const nn::UNet<S>*>&,        \
                                                                  const data::Dataset&);                         \
  template TrainedModel<S> train_baseline(nn::UNetConfig, const train::TrainConfig&, const data::Dataset&,       \
                                          const data::Dataset*);                                                 \
  template std::vector<TrainedModel<S>> train_ensemble(const EnsembleSpec&, nn::UNetConfig, train::TrainConfig, \
                                                       const data::Dataset&, const data::Dataset*);
EDL_INSTANTIATE(float)
EDL_INSTANTIATE(double)
#undef EDL_INSTANTIATE

}  // namespace edl::baselines
