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

#ifndef OVERMOD_NN_GRADIENT_CHECK_HPP_
#define OVERMOD_NN_GRADIENT_CHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>

#include "overmod/nn/tensor.hpp"

namespace overmod::nn {

// Evaluates the scalar loss at the current parameter values. When
// `with_grad` is true it must also leave dLoss/dParam in the tensors' grad
// buffers (the checker zeroes them first).
using LossFunction = std::function<double(ParameterSet& params, bool with_grad)>;

// Identifies the piecewise-smooth region of the most recent loss
// evaluation (see region_signature in encoders.hpp).
using RegionFunction = std::function<std::uint64_t()>;

struct GradientCheckOptions {
  double epsilon = 1e-5;
  // Coordinates sampled per tensor; tensors smaller than this are checked
  // exhaustively.
  std::size_t samples_per_tensor = 12;
  std::uint64_t seed = 0;
  // When set, a coordinate whose two perturbed evaluations land in
  // different regions straddles a kink and is skipped.
  RegionFunction region;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

// Max over sampled coordinates of
//   |analytic - central difference| / (|analytic| + |numeric| + 1e-12).
// Throws ConfigError for epsilon outside [1e-7, 1e-4] and InputError when
// the loss is not finite.
GradientCheckReport gradient_check_report(const LossFunction& loss, ParameterSet& params,
                                          const GradientCheckOptions& options = {});
double gradient_check(const LossFunction& loss, ParameterSet& params,
                      const GradientCheckOptions& options = {});

}  // namespace overmod::nn

#endif  // OVERMOD_NN_GRADIENT_CHECK_HPP_
