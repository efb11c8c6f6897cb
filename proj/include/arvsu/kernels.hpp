#ifndef ARVSU_KERNELS_HPP
#define ARVSU_KERNELS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <type_traits>

#include "arvsu/errors.hpp"

// Elementwise activations and softmax on plain Eigen arrays. These carry no
// gradient bookkeeping; the autodiff ops in autodiff.hpp are built on them.
namespace arvsu::kernels {

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
Scalar sigmoid(Scalar x) {
  // Branch on sign so exp() never overflows.
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return sigmoid(v); });
}

template <typename Derived>
auto tanh(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return std::tanh(v); });
}

template <typename Derived>
auto relu(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.max(Scalar(0));
}

// 1 where x > 0, else 0 (the subgradient at exactly 0 is 0).
template <typename Derived>
auto relu_mask(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (x > Scalar(0)).template cast<Scalar>();
}

template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::ArrayBase<Derived>& v) {
  if (v.size() == 0) throw DomainError("softmax of an empty vector");
  const auto shifted = (v - v.maxCoeff()).exp().eval();
  return shifted / shifted.sum();
}

// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax(const Eigen::DenseBase<Derived>& v) {
  if (v.size() == 0) throw DomainError("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

}  // namespace arvsu::kernels

#endif  // ARVSU_KERNELS_HPP
