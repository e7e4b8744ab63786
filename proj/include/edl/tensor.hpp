#pragma once

#include <Eigen/Dense>

#include <array>
#include <deque>
#include <string>
#include <vector>

namespace edl::nn {

using Index = Eigen::Index;

/// Dense 4-D activation tensor with extents (batch, channels, height, width).
///
/// Storage is an Eigen column-major matrix with one row per pixel
/// (row = n*H*W + y*W + x) and one column per channel, i.e. the flat buffer is
/// row-major over (channel, batch, y, x). Each channel of the whole batch is
/// contiguous, which lets a convolution run as GEMMs over all pixels.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Tensor() = default;
  Tensor(Index batch, Index channels, Index height, Index width)
      : n_(batch), h_(height), w_(width), data_(Matrix::Zero(batch * height * width, channels)) {}
  /// Wraps an existing (pixels x channels) matrix; the channel count follows
  /// the matrix's column count.
  Tensor(Index batch, Index height, Index width, Matrix data)
      : n_(batch), h_(height), w_(width), data_(std::move(data)) {}

  Index batch() const { return n_; }
  Index channels() const { return data_.cols(); }
  Index height() const { return h_; }
  Index width() const { return w_; }
  Index plane() const { return h_ * w_; }
  Index pixels() const { return n_ * h_ * w_; }
  Index size() const { return data_.size(); }
  std::array<Index, 4> shape() const { return {n_, channels(), h_, w_}; }

  Matrix& mat() { return data_; }
  const Matrix& mat() const { return data_; }

  Scalar& at(Index n, Index c, Index y, Index x) { return data_(n * plane() + y * w_ + x, c); }
  Scalar at(Index n, Index c, Index y, Index x) const { return data_(n * plane() + y * w_ + x, c); }

  bool same_shape(const Tensor& o) const { return shape() == o.shape(); }
  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(n_, h_, w_, data_.template cast<Other>());
  }

  std::string shape_string() const {
    return std::to_string(n_) + "x" + std::to_string(channels()) + "x" + std::to_string(h_) + "x" +
           std::to_string(w_);
  }

 private:
  Index n_ = 0, h_ = 0, w_ = 0;
  Matrix data_;
};

using TensorXd = Tensor<double>;
using TensorXf = Tensor<float>;

/// Named trainable tensor. Values are stored column-major with one column per
/// output unit, so the flat buffer is row-major over the logical shape
/// (out, in, kh, kw) for convolution weights.
template <typename Scalar>
struct Parameter {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  std::string name;
  std::vector<Index> shape;
  Matrix value;
  Matrix grad;

  Index count() const { return value.size(); }
};

/// Ordered parameter set. Names are unique and shapes are fixed at
/// construction. Backed by a deque so references stay valid as parameters
/// are appended.
template <typename Scalar>
class ModelParams {
 public:
  using Param = Parameter<Scalar>;

  Param& add(std::string name, std::vector<Index> shape, Index rows, Index cols);

  std::deque<Param>& all() { return params_; }
  const std::deque<Param>& all() const { return params_; }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }

  const Param* find(const std::string& name) const;
  Index total_count() const;
  void zero_grad();

 private:
  std::deque<Param> params_;
};

}  // namespace edl::nn
