// Copyright 2026 The Overmod Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "overmod/nn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "overmod/error.hpp"

namespace overmod::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(shape[i]);
  }
  return out;
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : shape_(std::move(shape)),
      data_(shape_size(shape_), 0.0),
      requires_grad_(requires_grad) {
  if (requires_grad_) grad_.assign(data_.size(), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  if (data_.size() != shape_size(shape_)) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                      " does not match shape [" + shape_to_string(shape_) + "]");
  }
  if (requires_grad_) grad_.assign(data_.size(), 0.0);
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

Tensor& ParameterSet::add(const std::string& name, Shape shape) {
  auto [it, inserted] = tensors_.try_emplace(name, std::move(shape), true);
  if (!inserted) throw ConfigError("duplicate parameter name: " + name);
  return it->second;
}

bool ParameterSet::contains(const std::string& name) const {
  return tensors_.find(name) != tensors_.end();
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterSet::num_values() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

bool ParameterSet::same_values(const ParameterSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  auto a = tensors_.begin();
  auto b = other.tensors_.begin();
  for (; a != tensors_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
    auto da = a->second.data();
    auto db = b->second.data();
    if (!std::equal(da.begin(), da.end(), db.begin())) return false;
  }
  return true;
}

}  // namespace overmod::nn
