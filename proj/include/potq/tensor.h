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

#ifndef POTQ_TENSOR_H_
#define POTQ_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace potq {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct TensorImpl;

// One recorded operation. The output tensor owns its node; the node holds
// strong references to its inputs, so the graph is a DAG rooted at the loss.
struct Node {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  // Reads out.grad and accumulates into the inputs' grad buffers.
  std::function<void(const TensorImpl& out)> backward;
  bool consumed = false;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first needed
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  void ensure_grad();
};

}  // namespace detail

// Dense row-major float32 tensor with optional reverse-mode gradient.
//
// Tensor is a shared handle: copies alias the same storage. Operations in
// ops.h build a graph when any input requires a gradient; backward() on a
// scalar result fills the grad buffer of every tensor that requires one.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, float value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<float> data,
                          bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t i) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const float> data() const;
  std::span<float> mutable_data();
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  // Reverse-mode sweep from this scalar. Throws StateError when the graph
  // behind this tensor was already consumed by a previous call.
  void backward();

  // New leaf sharing no storage and no history with this tensor.
  Tensor clone(bool requires_grad = false) const;

  // Internal: used by ops to wire the graph.
  static Tensor make_result(const Shape& shape, std::vector<float> data,
                            std::vector<Tensor> inputs,
                            std::function<void(const detail::TensorImpl&)> backward);
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  detail::TensorImpl& checked() const;

  std::shared_ptr<detail::TensorImpl> impl_;
};

}  // namespace potq

#endif  // POTQ_TENSOR_H_
