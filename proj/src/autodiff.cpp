#include "arvsu/autodiff.hpp"

#include <unordered_set>

#include "arvsu/kernels.hpp"

namespace arvsu {

using detail::Node;
using Vector = Tensor::Vector;
using RowMajorMatrix = Tensor::RowMajorMatrix;

namespace {

// Gradient buffer of a rank-2 node viewed as a row-major matrix.
Eigen::Map<RowMajorMatrix> grad_matrix(Node& n) {
  if (!n.grad_set) {
    n.grad = Vector::Zero(n.value.size());
    n.grad_set = true;
  }
  return Eigen::Map<RowMajorMatrix>(n.grad.data(), n.value.rows(), n.value.cols());
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
}

void require_rank1(const Var& v, const char* op) {
  if (v.value().rank() != 1)
    throw DimensionError(std::string(op) + ": expected rank-1 tensor, got " + shape_string(v.shape()));
}

}  // namespace

Var::Var() : node_(std::make_shared<Node>()) {}

Var Var::parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

const Tensor& Var::value() const { return node_->value; }
bool Var::requires_grad() const { return node_->requires_grad; }
bool Var::is_leaf() const { return node_->leaf; }
bool Var::has_grad() const { return node_->grad_set; }

Tensor Var::grad() const {
  return Tensor(node_->value.shape(), grad_data());
}

const Tensor::Vector& Var::grad_data() const {
  if (!node_->grad_set) throw DomainError("no gradient recorded for tensor " + shape_string(shape()));
  return node_->grad;
}

void Var::clear_grad() {
  node_->grad.resize(0);
  node_->grad_set = false;
}

void Var::apply_update(double step) {
  node_->value.data() -= step * grad_data();
}

void Var::assign(const Tensor& value) {
  if (value.shape() != node_->value.shape())
    throw DimensionError("assign: shape " + shape_string(value.shape()) + " into " +
                         shape_string(node_->value.shape()));
  node_->value = value;
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->leaf = false;
  for (const Var& in : inputs) n->requires_grad = n->requires_grad || in.node_->requires_grad;
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (Var& in : inputs) n->inputs.push_back(std::move(in.node_));
    n->backprop = std::move(backprop);
  }
  return Var(std::move(n));
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || (bv.rank() != 1 && bv.rank() != 2) || av.cols() != bv.rows())
    throw DimensionError("matmul: cannot multiply " + shape_string(av.shape()) + " by " +
                         shape_string(bv.shape()));
  RowMajorMatrix c = av.matrix() * bv.matrix();
  Tensor out = bv.rank() == 1 ? Tensor::from_vector(Eigen::Map<const Vector>(c.data(), c.rows()))
                              : Tensor::from_matrix(c);
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& a = self.input(0);
    Node& b = self.input(1);
    const auto dc = Eigen::Map<const RowMajorMatrix>(self.grad.data(), a.value.rows(), b.value.cols());
    if (a.requires_grad) grad_matrix(a).noalias() += dc * b.value.matrix().transpose();
    if (b.requires_grad) grad_matrix(b).noalias() += a.value.matrix().transpose() * dc;
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), a.value().data() + b.value().data());
  return make_op(std::move(out), {a, b}, [](Node& self) {
    self.input(0).accumulate(self.grad);
    self.input(1).accumulate(self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape(), a.value().data().cwiseProduct(b.value().data()));
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& a = self.input(0);
    Node& b = self.input(1);
    a.accumulate(self.grad.cwiseProduct(b.value.data()));
    b.accumulate(self.grad.cwiseProduct(a.value.data()));
  });
}

Var scale(const Var& a, double factor) {
  Tensor out(a.shape(), a.value().data() * factor);
  return make_op(std::move(out), {a}, [factor](Node& self) { self.input(0).accumulate(self.grad * factor); });
}

Var sum(const Var& a) {
  return make_op(Tensor::scalar(a.value().data().sum()), {a}, [](Node& self) {
    Node& a = self.input(0);
    a.accumulate(Vector::Constant(a.value.size(), self.grad[0]));
  });
}

Var sigmoid(const Var& x) {
  Vector y = kernels::sigmoid(x.value().data().array()).matrix();
  return make_op(Tensor(x.shape(), std::move(y)), {x}, [](Node& self) {
    const auto s = self.value.data().array();
    self.input(0).accumulate((self.grad.array() * s * (1.0 - s)).matrix());
  });
}

Var tanh_(const Var& x) {
  Vector y = kernels::tanh(x.value().data().array()).matrix();
  return make_op(Tensor(x.shape(), std::move(y)), {x}, [](Node& self) {
    const auto t = self.value.data().array();
    self.input(0).accumulate((self.grad.array() * (1.0 - t * t)).matrix());
  });
}

Var relu(const Var& x) {
  Vector y = kernels::relu(x.value().data().array()).matrix();
  return make_op(Tensor(x.shape(), std::move(y)), {x}, [](Node& self) {
    Node& x = self.input(0);
    x.accumulate((self.grad.array() * kernels::relu_mask(x.value.data().array())).matrix());
  });
}

Var softmax(const Var& v) {
  require_rank1(v, "softmax");
  Vector s = kernels::softmax(v.value().data().array()).matrix();
  return make_op(Tensor(v.shape(), std::move(s)), {v}, [](Node& self) {
    const Vector& s = self.value.data();
    const double dot = self.grad.dot(s);
    self.input(0).accumulate((s.array() * (self.grad.array() - dot)).matrix());
  });
}

Var concat(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() == 1 && bv.rank() == 1) {
    Vector out(av.size() + bv.size());
    out << av.data(), bv.data();
    return make_op(Tensor::from_vector(std::move(out)), {a, b}, [](Node& self) {
      Node& a = self.input(0);
      Node& b = self.input(1);
      const Index m = a.value.size();
      a.accumulate(self.grad.head(m));
      b.accumulate(self.grad.tail(b.value.size()));
    });
  }
  if (av.rank() == 2 && bv.rank() == 2 && av.rows() == bv.rows()) {
    RowMajorMatrix out(av.rows(), av.cols() + bv.cols());
    out << av.matrix(), bv.matrix();
    return make_op(Tensor::from_matrix(out), {a, b}, [](Node& self) {
      Node& a = self.input(0);
      Node& b = self.input(1);
      const auto g = Eigen::Map<const RowMajorMatrix>(self.grad.data(), self.value.rows(), self.value.cols());
      if (a.requires_grad) grad_matrix(a) += g.leftCols(a.value.cols());
      if (b.requires_grad) grad_matrix(b) += g.rightCols(b.value.cols());
    });
  }
  throw DimensionError("concat: incompatible shapes " + shape_string(av.shape()) + " and " +
                       shape_string(bv.shape()));
}

Var row(const Var& table, Index index) {
  const Tensor& t = table.value();
  if (t.rank() != 2) throw DimensionError("row: expected rank-2 table, got " + shape_string(t.shape()));
  if (index < 0 || index >= t.rows())
    throw DomainError("row: index " + std::to_string(index) + " outside [0, " + std::to_string(t.rows()) + ")");
  Vector r = t.matrix().row(index).transpose();
  return make_op(Tensor::from_vector(std::move(r)), {table}, [index](Node& self) {
    Node& table = self.input(0);
    if (table.requires_grad) grad_matrix(table).row(index) += self.grad.transpose();
  });
}

Var pick(const Var& v, Index index) {
  require_rank1(v, "pick");
  if (index < 0 || index >= v.value().size())
    throw DomainError("pick: index " + std::to_string(index) + " outside vector of length " +
                      std::to_string(v.value().size()));
  return make_op(Tensor::scalar(v.value()[index]), {v}, [index](Node& self) {
    Node& v = self.input(0);
    Vector g = Vector::Zero(v.value.size());
    g[index] = self.grad[0];
    v.accumulate(g);
  });
}

Var log_clamped(const Var& x, double floor) {
  const Vector clamped = x.value().data().cwiseMax(floor);
  Vector y = clamped.array().log().matrix();
  return make_op(Tensor(x.shape(), std::move(y)), {x}, [floor](Node& self) {
    Node& x = self.input(0);
    const auto xv = x.value.data().array();
    x.accumulate(((xv >= floor).cast<double>() * self.grad.array() / xv.max(floor)).matrix());
  });
}

void backward(const Var& loss) {
  Node* root = loss.node_.get();
  if (root->value.size() != 1 || root->value.rank() > 1)
    throw DomainError("backward: loss must be a scalar, got shape " + shape_string(root->value.shape()));
  if (!root->requires_grad) return;

  // Iterative post-order DFS; the reverse of the result is a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-sweep; leaves keep accumulating.
  for (Node* n : order)
    if (!n->leaf) {
      n->grad = Vector::Zero(n->value.size());
      n->grad_set = true;
    }
  root->accumulate(Vector::Ones(1));

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->leaf && n->backprop) n->backprop(*n);
  }
  // Touch every reachable leaf so an all-zero gradient still counts as present.
  for (Node* n : order)
    if (n->leaf && !n->grad_set) n->accumulate(Vector::Zero(n->value.size()));
}

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw DomainError("finite_diff: eps must be positive");
  Tensor grad = Tensor::zeros(x.shape());
  Tensor probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace arvsu
