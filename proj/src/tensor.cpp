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

#include "sstr/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include "sstr/errors.hpp"

namespace sstr {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void TensorNode::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), real(0));
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor shape " + shape_str(shape) + " has a zero dimension");
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), real(0), requires_grad); }

Tensor Tensor::full(Shape shape, real value, bool requires_grad) {
  check_shape(shape);
  auto node = std::make_shared<TensorNode>();
  node->data.assign(numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<real> values, bool requires_grad) {
  check_shape(shape);
  if (numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " needs " + std::to_string(numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(real value) { return from({1}, {value}); }

real Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

std::span<real> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), real(0)); }

Tensor Tensor::clone() const {
  auto node = std::make_shared<TensorNode>(*node_);
  node->tape_id = 0;
  return Tensor(std::move(node));
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<TensorNode>();
  node->shape = node_->shape;
  node->data = node_->data;
  return Tensor(std::move(node));
}

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_next_tape_id{1};

}  // namespace

Tape::Tape() : previous_(g_active_tape), id_(g_next_tape_id++) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const std::shared_ptr<TensorNode>& out, std::function<void()> backward) {
  out->tape_id = id_;
  entries_.push_back({out, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward() on an undefined tensor");
  if (loss.size() != 1) throw DimensionError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  if (consumed_) throw Error("backward() called twice on the same tape");
  if (!loss.requires_grad() || loss.node()->tape_id != id_) {
    throw Error("backward() on a constant graph: the loss has no recorded history on the active tape");
  }
  consumed_ = true;
  loss.node()->ensure_grad();
  loss.node()->grad[0] += real(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->out->grad.empty()) it->backward();
  }
  entries_.clear();
}

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw Error("backward() on a constant graph: no active tape");
  tape->backward(loss);
}

}  // namespace sstr
