#include "mainvc/tensor/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

MAINVC_NAMESPACE_BEGIN

namespace {
thread_local bool t_grad_enabled = true;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << " x ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<Scalar>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), Scalar(0));
  return grad;
}

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Scalar(0), requires_grad);
}

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<Scalar>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

detail::Node& Tensor::checked() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked().value.size(); }

std::span<const Scalar> Tensor::data() const { return checked().value; }

std::span<Scalar> Tensor::mutable_data() {
  auto& n = checked();
  if (!n.is_leaf) throw std::logic_error("in-place write to a non-leaf tensor");
  return n.value;
}

Scalar Tensor::item() const {
  const auto& n = checked();
  if (n.value.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_to_string(n.shape));
  }
  return n.value[0];
}

Scalar Tensor::at(std::size_t row, std::size_t col) const {
  const auto& n = checked();
  if (n.shape.size() != 2) throw ShapeError("at(row, col) needs a matrix");
  return n.value[row * n.shape[1] + col];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  auto& n = checked();
  if (!n.is_leaf) throw std::logic_error("requires_grad can only be set on leaves");
  n.requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return checked().is_leaf; }

bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::span<const Scalar> Tensor::grad() const { return checked().grad; }

std::span<Scalar> Tensor::mutable_grad() { return checked().grad_buffer(); }

void Tensor::zero_grad() { checked().grad.clear(); }

Tensor Tensor::detach() const {
  const auto& n = checked();
  return from(n.shape, n.value, false);
}

Tensor Tensor::make_result(Shape shape, std::vector<Scalar> value,
                           std::vector<Tensor> inputs,
                           std::function<void(const detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (node->value.size() != shape_numel(node->shape)) {
    throw std::logic_error("operator produced inconsistent shape");
  }
  const bool track =
      t_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
        return t.requires_grad();
      });
  if (track) {
    node->requires_grad = true;
    node->is_leaf = false;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  auto& root = checked();
  if (root.value.size() != 1 || !root.shape.empty()) {
    throw ShapeError("backward() requires a scalar, got " + shape_to_string(root.shape));
  }
  if (!root.requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node*> order;
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(&root, 0);
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->is_leaf) n->grad.clear();
  }
  root.grad_buffer()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf || n->grad.empty() || !n->backward) continue;
    n->backward(*n);
  }
}

MAINVC_NAMESPACE_END
