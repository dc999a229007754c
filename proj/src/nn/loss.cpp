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

#include "overmod/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "overmod/error.hpp"

namespace overmod::nn {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sum_exp(std::span<const double> x) {
  const double top = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - top);
  return top + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
  return out;
}

double bce_loss(double p, int label) {
  const double q = std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
  return label == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double cross_entropy_loss(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw InputError("cross-entropy target " + std::to_string(target) +
                     " outside " + std::to_string(logits.size()) + " classes");
  }
  return log_sum_exp(logits) - logits[target];
}

void cross_entropy_backward(std::span<const double> logits, std::size_t target,
                            double scale, std::span<double> grad) {
  const double lse = log_sum_exp(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad[i] += scale * (std::exp(logits[i] - lse) - (i == target ? 1.0 : 0.0));
  }
}

}  // namespace overmod::nn
