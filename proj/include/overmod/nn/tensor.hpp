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

#ifndef OVERMOD_NN_TENSOR_HPP_
#define OVERMOD_NN_TENSOR_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace overmod::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major float64 tensor. When requires_grad is set, a gradient
// buffer of identical shape is allocated alongside the data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool requires_grad() const { return requires_grad_; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void zero_grad();

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

// Named learnable parameters. Iteration order is the lexical order of the
// names, which is also the checkpoint payload order.
class ParameterSet {
 public:
  using Map = std::map<std::string, Tensor>;

  Tensor& add(const std::string& name, Shape shape);
  bool contains(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return tensors_.size(); }
  std::size_t num_values() const;
  void zero_grad();

  Map::iterator begin() { return tensors_.begin(); }
  Map::iterator end() { return tensors_.end(); }
  Map::const_iterator begin() const { return tensors_.begin(); }
  Map::const_iterator end() const { return tensors_.end(); }

  // Same names, shapes and values.
  bool same_values(const ParameterSet& other) const;

 private:
  Map tensors_;
};

}  // namespace overmod::nn

#endif  // OVERMOD_NN_TENSOR_HPP_
