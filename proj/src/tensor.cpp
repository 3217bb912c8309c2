#include "bridgepress/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_set>

namespace bridgepress {

namespace {

std::atomic<std::uint64_t> next_node_id{1};

std::shared_ptr<detail::Node> new_node(Shape shape, Vector value) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
  return node;
}

void check_layout(const Shape& shape, const Vector& values) {
  for (Index e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
}

}  // namespace

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

void accumulate(Node& node, const Eigen::Ref<const Vector>& g) {
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

}  // namespace detail

Tensor Tensor::constant(Shape shape, Vector values, FinitePolicy policy) {
  check_layout(shape, values);
  if (policy == FinitePolicy::reject && !values.allFinite()) {
    throw NumericError("non-finite value in tensor " + shape_string(shape));
  }
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::parameter(Shape shape, Vector values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape) {
  const Index n = shape_size(shape);
  return constant(std::move(shape), Vector::Zero(n));
}

Tensor Tensor::full(Shape shape, double value) {
  const Index n = shape_size(shape);
  return constant(std::move(shape), Vector::Constant(n, value));
}

Tensor Tensor::scalar(double value) { return constant({1}, Vector::Constant(1, value)); }

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  RowMatrix copy = m;
  return constant({m.rows(), m.cols()}, Eigen::Map<const Vector>(copy.data(), copy.size()));
}

detail::Node& Tensor::node() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

Index Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  }
  return s[axis];
}

Index Tensor::size() const { return node().value.size(); }
std::uint64_t Tensor::id() const { return node().id; }
const Vector& Tensor::values() const { return node().value; }

Vector& Tensor::mutable_values() {
  if (!node().leaf) throw ContractError("only leaf tensors can be modified in place");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on a tensor of shape " + shape_string(shape()));
  return node().value[0];
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  if (rank() != 2) throw DimensionError("matrix view needs rank 2, got " + shape_string(shape()));
  return {node_->value.data(), shape()[0], shape()[1]};
}

bool Tensor::requires_grad() const { return node().requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!node().leaf) throw ContractError("requires_grad can only be changed on leaves");
  node_->requires_grad = on;
  if (!on) node_->grad.resize(0);
}

bool Tensor::is_leaf() const { return node().leaf; }
bool Tensor::has_grad() const { return node().grad.size() != 0; }

Vector Tensor::grad() const {
  if (has_grad()) return node_->grad;
  return Vector::Zero(size());
}

void Tensor::zero_grad() { node().grad.resize(0); }

Tensor Tensor::detach() const { return Tensor(new_node(shape(), values())); }

Tensor Tensor::make_result(Shape shape, Vector value, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward) {
  if (!value.allFinite()) {
    throw NumericError("operation produced a non-finite value (shape " + shape_string(shape) +
                       ")");
  }
  auto node = new_node(std::move(shape), std::move(value));
  bool needs_grad = false;
  for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
  if (needs_grad) {
    node->requires_grad = true;
    node->leaf = false;
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(shape()));
  }
  detail::Node& root = node();
  if (!root.requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{&root, 0}};
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    if (!n->leaf) n->grad = Vector::Zero(n->value.size());
  }
  detail::accumulate(root, Vector::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->leaf && n->backward) n->backward(*n);
  }
}

namespace testing {

namespace {
std::atomic<Fault> current_fault{Fault::none};
}

void inject_fault(Fault fault) { current_fault.store(fault); }
Fault active_fault() { return current_fault.load(); }

}  // namespace testing

}  // namespace bridgepress
