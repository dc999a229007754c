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

#ifndef OVERMOD_NN_ADAM_HPP_
#define OVERMOD_NN_ADAM_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "overmod/nn/tensor.hpp"

namespace overmod::nn {

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
};

// One bias-corrected Adam step using the gradients stored on each tensor.
// Moment buffers are created (zeroed) on first use.
void adam_update(ParameterSet& params, AdamState& state);

}  // namespace overmod::nn

#endif  // OVERMOD_NN_ADAM_HPP_
