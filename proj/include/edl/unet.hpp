#pragma once

#include "edl/graph.hpp"
#include "edl/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace edl::nn {

enum class Head { evidential, softmax };
/// Non-negative activation applied to the evidential head.
enum class EvidenceActivation { softplus, relu };

std::string to_string(Head h);
std::string to_string(EvidenceActivation a);
Head parse_head(const std::string& s);
EvidenceActivation parse_activation(const std::string& s);

struct UNetConfig {
  int input_channels = 1;
  int image_size = 32;
  /// Width of each resolution level, finest first. The last entry is the
  /// width of the coarsest level, which is reached after filters.size()-1
  /// poolings.
  std::vector<int> filters{8, 16, 32, 64};
  /// When positive, every level is followed by pooling and an extra block of
  /// this width sits below the coarsest level.
  int bottleneck_filters = 0;
  double dropout_rate = 0.1;
  Head head = Head::evidential;
  EvidenceActivation activation = EvidenceActivation::softplus;
  std::uint64_t seed = 0;

  /// Throws InvalidInput on violated invariants.
  void validate() const;
};

/// 2-D U-Net: per level two 3x3 conv-ReLU-dropout units, 2x2 max pooling
/// between levels, bilinear upsampling with skip concatenation on the way
/// back up, and a 2-channel pointwise head.
template <typename Scalar>
class UNet {
 public:
  using TensorT = Tensor<Scalar>;
  using Param = Parameter<Scalar>;

  explicit UNet(UNetConfig cfg);
  /// Copies rebuild the layer table so it points into the copy's own
  /// parameters; the recorded graph is not copied.
  UNet(const UNet& other);
  UNet& operator=(const UNet& other);
  UNet(UNet&&) = default;
  UNet& operator=(UNet&&) = default;

  const UNetConfig& config() const { return cfg_; }
  ModelParams<Scalar>& params() { return params_; }
  const ModelParams<Scalar>& params() const { return params_; }

  /// Runs the network on a batch (N x input_channels x S x S) and records the
  /// graph for a following backward(). Output is N x 2 x S x S: evidence
  /// (e1, e2) for the evidential head, (p1, p2) for the softmax head.
  TensorT forward(const TensorT& batch, bool dropout_active, std::uint64_t rng_seed = 0);

  /// Inference-only forward pass; does not disturb a recorded graph.
  TensorT predict(const TensorT& batch, bool dropout_active = false, std::uint64_t rng_seed = 0) const;

  /// Accumulates d(loss)/d(params) given d(loss)/d(output) for the last
  /// forward pass, then releases the recorded graph.
  void backward(const TensorT& grad_output);

  bool has_recorded_forward() const { return graph_.has_value(); }

 private:
  struct Block {
    Param* w0;
    Param* b0;
    Param* w1;
    Param* b1;
  };

  Block make_block(const std::string& prefix, int in, int out);
  Var run_block(Graph<Scalar>& g, Var x, const Block& blk, bool dropout_active, SplitMix64& rng) const;
  Var run(Graph<Scalar>& g, const TensorT& batch, bool dropout_active, std::uint64_t rng_seed) const;
  void check_input(const TensorT& batch) const;

  UNetConfig cfg_;
  ModelParams<Scalar> params_;
  std::vector<Block> down_;
  std::optional<Block> bottleneck_;
  std::vector<Block> up_;
  Param* head_w_ = nullptr;
  Param* head_b_ = nullptr;

  std::optional<Graph<Scalar>> graph_;
  Var output_;
};

extern template class UNet<float>;
extern template class UNet<double>;

/// He-uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename Scalar>
void he_uniform(Parameter<Scalar>& p, Index fan_in, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
}

}  // namespace edl::nn
