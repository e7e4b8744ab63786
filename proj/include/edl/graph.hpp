#pragma once

#include "edl/rng.hpp"
#include "edl/tensor.hpp"

#include <deque>
#include <functional>

namespace edl::nn {

/// Handle to a value recorded on a Graph.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode differentiation tape over Tensor-valued operations.
///
/// Every operation appends a node holding its forward value and a closure that
/// propagates the node's gradient to its inputs. backward() walks the tape in
/// reverse creation order, which is a valid topological order because inputs
/// are always recorded before their consumers. Parameter gradients are
/// accumulated into Parameter::grad.
template <typename Scalar>
class Graph {
 public:
  using TensorT = Tensor<Scalar>;
  using Param = Parameter<Scalar>;

  /// Constant input; no gradient is propagated into it.
  Var input(TensorT x);
  /// Leaf whose gradient is retained and readable through grad().
  Var variable(TensorT x);

  /// Same-padded 2-D convolution with an odd square kernel. The weight holds
  /// (in*kernel*kernel) rows ordered (in, ky, kx) and one column per output
  /// channel; bias is (out x 1).
  Var conv2d(Var x, Param& weight, Param& bias, int kernel);
  Var relu(Var x);
  Var softplus(Var x);
  /// Softmax across channels at every pixel.
  Var softmax(Var x);
  /// Inverted dropout: kept activations are scaled by 1/(1-rate).
  Var dropout(Var x, double rate, SplitMix64& rng);
  Var max_pool2(Var x);
  /// Bilinear 2x upsampling with half-pixel centres and edge clamping.
  Var upsample2(Var x);
  /// Channel concatenation [a, b].
  Var concat(Var a, Var b);
  /// Sum of all elements times `scale`, as a 1x1x1x1 tensor.
  Var scaled_sum(Var x, Scalar scale = Scalar(1));

  const TensorT& value(Var v) const { return nodes_[v.id].value; }
  const TensorT& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(out) and propagates to every recorded node.
  void backward(Var out, const TensorT& seed);

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    bool needs_grad = false;
    std::function<void(Graph&, Node&)> back;
  };

  Var push(TensorT value, bool needs_grad, std::function<void(Graph&, Node&)> back = {});
  TensorT& grad_buffer(Var v);
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  std::deque<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace edl::nn
