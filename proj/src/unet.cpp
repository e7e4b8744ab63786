#include "edl/unet.hpp"

#include "edl/error.hpp"

#include <cmath>
#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace edl::nn {

namespace {

// Activation buffers of a few MB are allocated and freed every step. glibc
// serves them with fresh mmaps by default, and the resulting page faults cost
// more than the arithmetic. Keeping them on the heap roughly halves step time.
void tune_allocator() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

}  // namespace

std::string to_string(Head h) { return h == Head::evidential ? "evidential" : "softmax"; }

std::string to_string(EvidenceActivation a) { return a == EvidenceActivation::softplus ? "softplus" : "relu"; }

Head parse_head(const std::string& s) {
  if (s == "evidential") return Head::evidential;
  if (s == "softmax") return Head::softmax;
  throw InvalidInput("unknown head: " + s);
}

EvidenceActivation parse_activation(const std::string& s) {
  if (s == "softplus") return EvidenceActivation::softplus;
  if (s == "relu") return EvidenceActivation::relu;
  throw InvalidInput("unknown evidence activation: " + s);
}

void UNetConfig::validate() const {
  if (input_channels != 1 && input_channels != 2) throw InvalidInput("input_channels must be 1 or 2");
  if (image_size <= 0 || image_size % 16 != 0) throw InvalidInput("image_size must be a positive multiple of 16");
  if (filters.size() < 2) throw InvalidInput("filters needs at least two levels");
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (filters[i] <= 0) throw InvalidInput("filters must be positive");
    if (i > 0 && filters[i] <= filters[i - 1]) throw InvalidInput("filters must be strictly increasing");
  }
  const std::size_t pools = filters.size() - 1 + (bottleneck_filters > 0 ? 1 : 0);
  if (pools >= 30 || image_size % (1 << pools) != 0) throw InvalidInput("image_size not divisible by 2^pools");
  if (bottleneck_filters < 0) throw InvalidInput("bottleneck_filters must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidInput("dropout_rate must be in [0,1)");
}

template <typename Scalar>
UNet<Scalar>::UNet(UNetConfig cfg) : cfg_(std::move(cfg)) {
  tune_allocator();
  cfg_.validate();
  const auto& f = cfg_.filters;
  const int levels = static_cast<int>(f.size());
  int in = cfg_.input_channels;
  for (int i = 0; i < levels; ++i) {
    down_.push_back(make_block("down" + std::to_string(i), in, f[i]));
    in = f[i];
  }
  if (cfg_.bottleneck_filters > 0) {
    bottleneck_ = make_block("bottleneck", in, cfg_.bottleneck_filters);
    in = cfg_.bottleneck_filters;
  }
  // Decoder levels mirror every encoder level that has a skip connection.
  const int first_up = cfg_.bottleneck_filters > 0 ? levels - 1 : levels - 2;
  for (int i = first_up; i >= 0; --i) {
    up_.push_back(make_block("up" + std::to_string(i), in + f[i], f[i]));
    in = f[i];
  }
  head_w_ = &params_.add("head.weight", {2, in, 1, 1}, in, 2);
  head_b_ = &params_.add("head.bias", {2}, 2, 1);

  SplitMix64 rng(cfg_.seed);
  for (auto& p : params_.all()) {
    if (p.shape.size() == 4) he_uniform(p, p.shape[1] * p.shape[2] * p.shape[3], rng);
  }
}

template <typename Scalar>
UNet<Scalar>::UNet(const UNet& other) : UNet(other.cfg_) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    params_[i].value = other.params_[i].value;
    params_[i].grad = other.params_[i].grad;
  }
}

template <typename Scalar>
UNet<Scalar>& UNet<Scalar>::operator=(const UNet& other) {
  if (this != &other) *this = UNet(other);
  return *this;
}

template <typename Scalar>
typename UNet<Scalar>::Block UNet<Scalar>::make_block(const std::string& prefix, int in, int out) {
  Block b{};
  b.w0 = &params_.add(prefix + ".conv0.weight", {out, in, 3, 3}, Index{in} * 9, out);
  b.b0 = &params_.add(prefix + ".conv0.bias", {out}, out, 1);
  b.w1 = &params_.add(prefix + ".conv1.weight", {out, out, 3, 3}, Index{out} * 9, out);
  b.b1 = &params_.add(prefix + ".conv1.bias", {out}, out, 1);
  return b;
}

template <typename Scalar>
Var UNet<Scalar>::run_block(Graph<Scalar>& g, Var x, const Block& blk, bool dropout_active, SplitMix64& rng) const {
  x = g.relu(g.conv2d(x, *blk.w0, *blk.b0, 3));
  if (dropout_active) x = g.dropout(x, cfg_.dropout_rate, rng);
  x = g.relu(g.conv2d(x, *blk.w1, *blk.b1, 3));
  if (dropout_active) x = g.dropout(x, cfg_.dropout_rate, rng);
  return x;
}

template <typename Scalar>
void UNet<Scalar>::check_input(const TensorT& batch) const {
  if (batch.channels() != cfg_.input_channels || batch.height() != cfg_.image_size ||
      batch.width() != cfg_.image_size || batch.batch() < 1) {
    throw InvalidInput("UNet: input " + batch.shape_string() + " does not match config (" +
                       std::to_string(cfg_.input_channels) + " channels, " + std::to_string(cfg_.image_size) + "px)");
  }
}

template <typename Scalar>
Var UNet<Scalar>::run(Graph<Scalar>& g, const TensorT& batch, bool dropout_active, std::uint64_t rng_seed) const {
  check_input(batch);
  SplitMix64 rng(rng_seed);
  Var x = g.input(batch);
  std::vector<Var> skips;
  const std::size_t levels = down_.size();
  for (std::size_t i = 0; i < levels; ++i) {
    x = run_block(g, x, down_[i], dropout_active, rng);
    const bool last = i + 1 == levels;
    if (!last || bottleneck_) {
      skips.push_back(x);
      x = g.max_pool2(x);
    }
  }
  if (bottleneck_) x = run_block(g, x, *bottleneck_, dropout_active, rng);
  for (const Block& blk : up_) {
    x = g.upsample2(x);
    x = g.concat(skips.back(), x);
    skips.pop_back();
    x = run_block(g, x, blk, dropout_active, rng);
  }
  x = g.conv2d(x, *head_w_, *head_b_, 1);
  if (cfg_.head == Head::softmax) return g.softmax(x);
  return cfg_.activation == EvidenceActivation::softplus ? g.softplus(x) : g.relu(x);
}

template <typename Scalar>
Tensor<Scalar> UNet<Scalar>::forward(const TensorT& batch, bool dropout_active, std::uint64_t rng_seed) {
  graph_.emplace();
  output_ = run(*graph_, batch, dropout_active, rng_seed);
  return graph_->value(output_);
}

template <typename Scalar>
Tensor<Scalar> UNet<Scalar>::predict(const TensorT& batch, bool dropout_active, std::uint64_t rng_seed) const {
  Graph<Scalar> g;
  const Var out = run(g, batch, dropout_active, rng_seed);
  return g.value(out);
}

template <typename Scalar>
void UNet<Scalar>::backward(const TensorT& grad_output) {
  if (!graph_) throw StateError("UNet::backward called without a recorded forward pass");
  graph_->backward(output_, grad_output);
  graph_.reset();
}

template class UNet<float>;
template class UNet<double>;

}  // namespace edl::nn
