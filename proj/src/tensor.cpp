#include "edl/tensor.hpp"

#include "edl/error.hpp"

namespace edl::nn {

template <typename Scalar>
Parameter<Scalar>& ModelParams<Scalar>::add(std::string name, std::vector<Index> shape, Index rows, Index cols) {
  if (find(name) != nullptr) throw InvalidInput("duplicate parameter name: " + name);
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.value = Param::Matrix::Zero(rows, cols);
  p.grad = Param::Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename Scalar>
const Parameter<Scalar>* ModelParams<Scalar>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename Scalar>
Index ModelParams<Scalar>::total_count() const {
  Index total = 0;
  for (const auto& p : params_) total += p.count();
  return total;
}

template <typename Scalar>
void ModelParams<Scalar>::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

template class ModelParams<float>;
template class ModelParams<double>;

}  // namespace edl::nn
