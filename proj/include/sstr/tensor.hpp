// Copyright 2026 The SemanticSTR Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sstr {

// The library is built in two precisions: the regular float build, and a
// double build (SSTR_REAL_DOUBLE) used by the finite-difference gradient
// suites. No binary links both.
#ifdef SSTR_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

struct TensorNode {
  Shape shape;
  std::vector<real> data;
  std::vector<real> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // nonzero when produced by a recorded op

  void ensure_grad();
};

// Dense row-major tensor with shared ownership of its node. Copies alias the
// same storage; use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<real> values, bool requires_grad = false);
  static Tensor scalar(real value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const real> data() const { return node_->data; }
  std::span<real> mutable_data() { return node_->data; }
  real item() const;
  real operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const real> grad() const { return node_->grad; }
  std::span<real> mutable_grad();
  void zero_grad();

  Tensor clone() const;
  Tensor detach() const;  // same values, no history, no grad

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// Records differentiable ops executed on this thread while it is alive. Tapes
// nest; the innermost one is active. Ops run with no active tape record
// nothing and produce constant tensors.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(const std::shared_ptr<TensorNode>& out, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and replays the recorded ops in reverse. The
  // tape is consumed: its entries are released afterwards.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  std::uint64_t id() const { return id_; }

 private:
  struct Entry {
    std::shared_ptr<TensorNode> out;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
  Tape* previous_;
  std::uint64_t id_;
  bool consumed_ = false;
};

// Backpropagates through the active tape. Rejects non-scalar losses and
// losses with no recorded history.
void backward(const Tensor& loss);

}  // namespace sstr
