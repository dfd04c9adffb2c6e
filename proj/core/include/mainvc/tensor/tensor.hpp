#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mainvc/precision.hpp"

MAINVC_NAMESPACE_BEGIN

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;  // empty until something is accumulated
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs.
  std::function<void(const Node&)> backward;

  std::vector<Scalar>& grad_buffer();
};

}  // namespace detail

/// Handle to a node of the differentiation graph. Copies share the node;
/// use clone() or detach() for an independent value.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Scalar> values,
                     bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const Scalar> data() const;
  /// Mutable access is only allowed on leaves (parameters, inputs).
  std::span<Scalar> mutable_data();
  Scalar item() const;
  Scalar operator[](std::size_t i) const { return data()[i]; }
  Scalar at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  /// Gradient buffer; empty span when nothing has been accumulated.
  std::span<const Scalar> grad() const;
  std::span<Scalar> mutable_grad();
  void zero_grad();

  /// Same values, no graph history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  /// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls.
  void backward() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Graph construction for operator implementations.
  static Tensor make_result(Shape shape, std::vector<Scalar> value,
                            std::vector<Tensor> inputs,
                            std::function<void(const detail::Node&)> backward);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& checked() const;

  std::shared_ptr<detail::Node> node_;
};

/// Whether new operations record graph history on this thread.
bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

MAINVC_NAMESPACE_END
