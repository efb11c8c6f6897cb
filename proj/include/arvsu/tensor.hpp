#ifndef ARVSU_TENSOR_HPP
#define ARVSU_TENSOR_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "arvsu/errors.hpp"

namespace arvsu {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major array of rank 0 (scalar), 1 (vector) or 2 (matrix).
// Storage is a flat Eigen column vector; matrix() exposes a row-major view.
template <typename Scalar>
class BasicTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMajorMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

  BasicTensor() : shape_{}, data_(Vector::Zero(1)) {}

  BasicTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.size() > 2) throw DimensionError("tensor rank above 2 is not supported: " + shape_string(shape_));
    for (Index d : shape_)
      if (d < 0) throw DimensionError("negative extent in shape " + shape_string(shape_));
    if (shape_size(shape_) != data_.size())
      throw DimensionError("shape " + shape_string(shape_) + " does not match " +
                           std::to_string(data_.size()) + " values");
  }

  static BasicTensor zeros(Shape shape) {
    const Index n = shape_size(shape);
    return BasicTensor(std::move(shape), Vector::Zero(n));
  }
  static BasicTensor constant(Shape shape, Scalar value) {
    const Index n = shape_size(shape);
    return BasicTensor(std::move(shape), Vector::Constant(n, value));
  }
  static BasicTensor scalar(Scalar value) { return BasicTensor(Shape{}, Vector::Constant(1, value)); }

  static BasicTensor vector(std::initializer_list<Scalar> values) {
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar x : values) v[i++] = x;
    return from_vector(std::move(v));
  }
  static BasicTensor from_vector(Vector v) {
    const Index n = v.size();
    return BasicTensor(Shape{n}, std::move(v));
  }
  static BasicTensor from_std(const std::vector<Scalar>& values) {
    return from_vector(Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size())));
  }

  // Rows of the nested initializer list become rows of the matrix.
  static BasicTensor matrix(std::initializer_list<std::initializer_list<Scalar>> rows) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r ? static_cast<Index>(rows.begin()->size()) : 0;
    Vector v(r * c);
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != c) throw DimensionError("ragged matrix literal");
      for (Scalar x : row) v[i++] = x;
    }
    return BasicTensor(Shape{r, c}, std::move(v));
  }
  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    RowMajorMatrix rm = m;
    Vector v = Eigen::Map<const Vector>(rm.data(), rm.size());
    return BasicTensor(Shape{rm.rows(), rm.cols()}, std::move(v));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index extent(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }
  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }
  Scalar item() const {
    if (size() != 1) throw DomainError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  // Rank-2 tensors map to their rows x cols; rank-1 to a column; rank-0 to 1x1.
  Index rows() const { return rank() == 0 ? 1 : shape_[0]; }
  Index cols() const { return rank() == 2 ? shape_[1] : 1; }
  MatrixMap matrix() { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), rows(), cols()); }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  Vector data_;
};

using Tensor = BasicTensor<double>;

// Seeded pseudo-random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; every derived draw is computed here
// rather than through the implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n) by rejection, free of modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw DomainError("Rng::below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller; the second variate is discarded so the stream stays simple.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  Tensor uniform_tensor(Shape shape, double lo, double hi) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
    return t;
  }
  Tensor normal_tensor(Shape shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = normal(0.0, stddev);
    return t;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// 64-bit FNV-1a; used for stable seeds, config digests and checksums.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t hash = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}
inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace arvsu

#endif  // ARVSU_TENSOR_HPP
