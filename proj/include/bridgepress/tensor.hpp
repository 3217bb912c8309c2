#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bridgepress/errors.hpp"

namespace bridgepress {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor;

namespace detail {

struct Node {
  Shape shape;
  Vector value;
  Vector grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads `self.grad` and accumulates into the parents' grad buffers.
  std::function<void(Node& self)> backward;
};

/// Adds `g` into the node's grad buffer, allocating it on first use. No-op
/// for nodes that do not require a gradient.
void accumulate(Node& node, const Eigen::Ref<const Vector>& g);

}  // namespace detail

enum class FinitePolicy { reject, allow };

/// Dense row-major tensor of doubles with an optional reverse-mode gradient
/// record. Copies share the underlying node; values are immutable after
/// construction except through `mutable_values()` on leaves (optimizer
/// updates, checkpoint loads).
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, Vector values, FinitePolicy policy = FinitePolicy::reject);
  static Tensor parameter(Shape shape, Vector values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  Index dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  Index size() const;
  std::uint64_t id() const;

  const Vector& values() const;
  Vector& mutable_values();
  double item() const;
  /// Rank-2 view of the values.
  Eigen::Map<const RowMatrix> matrix() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  /// Gradient buffer; a zero vector when nothing has been accumulated yet.
  Vector grad() const;
  void zero_grad();

  /// Same values, cut from the computation record.
  Tensor detach() const;

  /// Reverse-mode pass from a scalar. Leaf gradients accumulate across calls;
  /// intermediate buffers are reset at the start of each pass.
  void backward() const;

  // Internal: construct the result of an op. Drops the record when no parent
  // needs a gradient.
  static Tensor make_result(Shape shape, Vector value, std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward);
  detail::Node& node() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Elementwise binaries require identical shapes;
// the only broadcasting is a row vector over the leading axis (`add_rowwise`)
// and a per-channel bias in `conv2d`.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// [n x m] + [m]: adds the row vector to every row.
Tensor add_rowwise(const Tensor& a, const Tensor& row);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, Index begin, Index end);

Tensor softmax(const Tensor& x, std::size_t axis);
/// Normalizes each row over the last axis. `scale`/`offset` may be undefined
/// (identity affine).
Tensor layer_norm(const Tensor& x, const Tensor& scale = {}, const Tensor& offset = {},
                  double eps = 1e-5);

/// x: [C, H, W], weight: [O, C, k, k], bias: [O] or undefined. Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Index stride,
              Index padding);
/// Nearest-neighbour 2x upsampling of [C, H, W].
Tensor upsample2x(const Tensor& x);
/// Keeps the top-left [C, height, width] window.
Tensor crop2d(const Tensor& x, Index height, Index width);

/// Mean binary cross-entropy of sigmoid(logits) against a constant label.
Tensor bce_with_logits(const Tensor& logits, double label);

namespace testing {

/// Deliberate defects used to prove the gradient checker detects them.
enum class Fault { none, softmax_backward_sign };
void inject_fault(Fault fault);
Fault active_fault();

}  // namespace testing

}  // namespace bridgepress
