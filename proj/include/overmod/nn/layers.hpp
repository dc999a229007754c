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

// Small dense layers used by the recurrent parts of the models: a linear
// map, a token embedding and a GRU cell. Each forward call records what its
// backward call needs; backward accumulates into the parameter gradients.

#ifndef OVERMOD_NN_LAYERS_HPP_
#define OVERMOD_NN_LAYERS_HPP_

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "overmod/nn/tensor.hpp"

namespace overmod::nn {

using Rng = std::mt19937_64;

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform_fan_in(Tensor& t, std::size_t fan_in, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(std::string prefix, std::size_t in_dim, std::size_t out_dim);

  void register_parameters(ParameterSet& params, Rng& rng) const;

  // y = W x + b
  void forward(const ParameterSet& params, std::span<const double> x,
               std::span<double> y) const;
  // Accumulates dW, db; writes dx when non-empty.
  void backward(ParameterSet& params, std::span<const double> x, std::span<const double> dy,
                std::span<double> dx) const;

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }

 private:
  std::string weight_;
  std::string bias_;
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(std::string prefix, std::size_t vocab, std::size_t dim);

  void register_parameters(ParameterSet& params, Rng& rng) const;
  std::span<const double> lookup(const ParameterSet& params, std::size_t id) const;
  void backward(ParameterSet& params, std::size_t id, std::span<const double> dy) const;

  std::size_t vocab() const { return vocab_; }
  std::size_t dim() const { return dim_; }

 private:
  std::string weight_;
  std::size_t vocab_ = 0;
  std::size_t dim_ = 0;
};

// Gate order in the stacked weights is (reset, update, candidate):
//   r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
class GruCell {
 public:
  struct Record {
    std::vector<double> x;
    std::vector<double> h_prev;
    std::vector<double> r;
    std::vector<double> z;
    std::vector<double> n;
    std::vector<double> hn;  // W_hn h + b_hn
    std::vector<double> h;
  };

  GruCell() = default;
  GruCell(std::string prefix, std::size_t input_dim, std::size_t hidden_dim);

  void register_parameters(ParameterSet& params, Rng& rng) const;
  void step(const ParameterSet& params, std::span<const double> x,
            std::span<const double> h_prev, Record& rec) const;
  // dh is the gradient flowing into h'. Writes dx and dh_prev (overwrite).
  void step_backward(ParameterSet& params, const Record& rec, std::span<const double> dh,
                     std::span<double> dx, std::span<double> dh_prev) const;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

 private:
  std::string w_ih_, w_hh_, b_ih_, b_hh_;
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
};

}  // namespace overmod::nn

#endif  // OVERMOD_NN_LAYERS_HPP_
