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

#ifndef OVERMOD_NN_LOSS_HPP_
#define OVERMOD_NN_LOSS_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace overmod::nn {

// Probabilities are clamped to [kProbabilityFloor, 1 - kProbabilityFloor]
// before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

double sigmoid(double x);

// Numerically stable log(sum(exp(x))).
double log_sum_exp(std::span<const double> x);

std::vector<double> softmax(std::span<const double> logits);

// -[y ln p + (1 - y) ln(1 - p)] for a label y in {0, 1}.
double bce_loss(double p, int label);

// -log softmax(logits)[target].
double cross_entropy_loss(std::span<const double> logits, std::size_t target);

// Gradient of cross_entropy_loss with respect to the logits, scaled by
// `scale` and added into `grad`.
void cross_entropy_backward(std::span<const double> logits, std::size_t target,
                            double scale, std::span<double> grad);

}  // namespace overmod::nn

#endif  // OVERMOD_NN_LOSS_HPP_
