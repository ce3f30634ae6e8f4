/* Copyright 2026 The PotQ Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "potq/tensor.h"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "potq/errors.h"

namespace potq {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

void TensorImpl::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
}

}  // namespace detail

namespace {

void validate_shape(const Shape& shape, std::size_t size) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_to_string(shape));
  }
  if (shape_numel(shape) != size) {
    throw DimensionError("shape " + shape_to_string(shape) + " does not hold " +
                         std::to_string(size) + " elements");
  }
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0f, requires_grad);
}

Tensor Tensor::full(const Shape& shape, float value, bool requires_grad) {
  return from_data(shape, std::vector<float>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<float> data, bool requires_grad) {
  validate_shape(shape, data.size());
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

detail::TensorImpl& Tensor::checked() const {
  if (!impl_) throw StateError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t i) const {
  const Shape& s = shape();
  if (i >= s.size()) throw DimensionError("dimension index out of range");
  return s[i];
}

std::size_t Tensor::numel() const { return checked().data.size(); }

std::span<const float> Tensor::data() const { return checked().data; }
std::span<float> Tensor::mutable_data() { return checked().data; }

float Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() requires a single-element tensor");
  return checked().data[0];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }
void Tensor::set_requires_grad(bool value) { checked().requires_grad = value; }

bool Tensor::has_grad() const {
  const auto& t = checked();
  return !t.grad.empty();
}

std::span<const float> Tensor::grad() const {
  if (!has_grad()) throw StateError("tensor has no gradient");
  return checked().grad;
}

std::span<float> Tensor::mutable_grad() {
  checked().ensure_grad();
  return checked().grad;
}

void Tensor::zero_grad() {
  auto& t = checked();
  if (!t.grad.empty()) std::fill(t.grad.begin(), t.grad.end(), 0.0f);
}

Tensor Tensor::clone(bool requires_grad) const {
  return from_data(shape(), std::vector<float>(data().begin(), data().end()), requires_grad);
}

Tensor Tensor::make_result(const Shape& shape, std::vector<float> data,
                           std::vector<Tensor> inputs,
                           std::function<void(const detail::TensorImpl&)> backward) {
  Tensor out = from_data(shape, std::move(data));
  bool needs_grad = false;
  for (const Tensor& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (!needs_grad) return out;
  auto node = std::make_shared<detail::Node>();
  for (const Tensor& in : inputs) node->inputs.push_back(in.impl_);
  node->backward = std::move(backward);
  out.impl_->requires_grad = true;
  out.impl_->node = std::move(node);
  return out;
}

void Tensor::backward() {
  auto& root = checked();
  if (root.data.size() != 1) throw InputError("backward() requires a scalar loss");
  if (root.node && root.node->consumed) {
    throw StateError("backward() called twice on the same graph");
  }
  if (!root.requires_grad) return;

  // Iterative post-order DFS gives a topological order of the nodes.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack{{&root, 0}};
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    if (t->node && next < t->node->inputs.size()) {
      detail::TensorImpl* child = t->node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
      continue;
    }
    order.push_back(t);
    stack.pop_back();
  }

  for (detail::TensorImpl* t : order) {
    if (t->node && t->node->consumed) {
      throw StateError("backward() reached a graph that was already consumed");
    }
  }

  root.ensure_grad();
  root.grad[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* t = *it;
    if (!t->node) continue;
    for (auto& in : t->node->inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    t->node->backward(*t);
    t->node->consumed = true;
    t->node->backward = nullptr;
  }
}

}  // namespace potq
