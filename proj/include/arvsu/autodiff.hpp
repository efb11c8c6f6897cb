#ifndef ARVSU_AUTODIFF_HPP
#define ARVSU_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <vector>

#include "arvsu/tensor.hpp"

namespace arvsu {

namespace detail {
struct Node;
}

// Handle to a value in a define-by-run computation graph.
//
// Parameters are leaves whose gradient buffers persist and accumulate across
// backward() calls until cleared. Every other Var is produced by an op and
// holds shared references to its inputs, so the graph lives exactly as long
// as the Vars that reach it. Copies share the underlying node.
//
// Forward passes only read parameter nodes, so several threads may build
// graphs over the same frozen parameters concurrently. backward() writes
// gradient buffers and must not run concurrently with anything touching the
// same parameters.
class Var {
 public:
  Var();

  static Var parameter(Tensor value);
  static Var constant(Tensor value);

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

  bool requires_grad() const;
  bool is_leaf() const;

  // A gradient exists once backward() has reached this node.
  bool has_grad() const;
  // Gradient with the value's shape; throws DomainError when none exists.
  Tensor grad() const;
  const Tensor::Vector& grad_data() const;
  void clear_grad();

  // In-place parameter update: value -= step * grad.
  void apply_update(double step);
  // Replaces a leaf's value; shape must match.
  void assign(const Tensor& value);

  bool same_node(const Var& other) const { return node_ == other.node_; }

 private:
  friend struct detail::Node;
  friend Var make_op(Tensor value, std::vector<Var> inputs,
                     std::function<void(detail::Node&)> backprop);
  friend void backward(const Var& loss);

  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Generic op constructor used by the ops below. backprop receives the output
// node with its gradient filled and must accumulate into its inputs.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backprop);

// [m x k] * [k x n] -> [m x n]; a rank-1 right operand of length k yields a
// rank-1 result of length m.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double factor);
Var sum(const Var& a);

Var sigmoid(const Var& x);
Var tanh_(const Var& x);
Var relu(const Var& x);
// Rank-1 only; computed with max subtraction.
Var softmax(const Var& v);

// Rank-1 operands concatenate end to end; rank-2 operands with equal row
// counts concatenate along columns.
Var concat(const Var& a, const Var& b);

// Row `index` of a rank-2 table as a rank-1 Var.
Var row(const Var& table, Index index);
// Element `index` of a rank-1 Var as a scalar.
Var pick(const Var& v, Index index);
// log(max(x, floor)) elementwise; gradient is zero where clamped.
Var log_clamped(const Var& x, double floor);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

// Reverse sweep from a scalar loss. Every reachable parameter gets
// d(loss)/d(param) added to its gradient buffer.
void backward(const Var& loss);

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps);

namespace detail {

struct Node {
  Tensor value;
  Tensor::Vector grad;  // empty until first accumulation
  bool requires_grad = false;
  bool leaf = true;
  bool grad_set = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backprop;

  // Adds g into this node's gradient buffer (allocating on first use).
  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (!requires_grad) return;
    if (!grad_set) {
      grad = Tensor::Vector::Zero(value.size());
      grad_set = true;
    }
    grad += g;
  }
  Node& input(std::size_t i) { return *inputs[i]; }
};

}  // namespace detail

}  // namespace arvsu

#endif  // ARVSU_AUTODIFF_HPP
