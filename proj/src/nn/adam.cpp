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

#include "overmod/nn/adam.hpp"

#include <cmath>

#include "overmod/error.hpp"

namespace overmod::nn {

void adam_update(ParameterSet& params, AdamState& state) {
  for (auto& [name, tensor] : params) {
    if (tensor.grad().size() != tensor.size()) {
      throw ConfigError("parameter " + name + " has no gradient buffer");
    }
    auto [m_it, m_new] = state.first_moment.try_emplace(name, tensor.size(), 0.0);
    auto [v_it, v_new] = state.second_moment.try_emplace(name, tensor.size(), 0.0);
    if (m_it->second.size() != tensor.size() || v_it->second.size() != tensor.size()) {
      throw ConfigError("Adam moment buffers for " + name + " do not match [" +
                        shape_to_string(tensor.shape()) + "]");
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, tensor] : params) {
    auto w = tensor.data();
    auto g = tensor.grad();
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace overmod::nn
