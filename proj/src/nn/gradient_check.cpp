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

#include "overmod/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "overmod/error.hpp"

namespace overmod::nn {
namespace {

double checked(double value) {
  if (!std::isfinite(value)) throw InputError("gradient check: loss is not finite");
  return value;
}

}  // namespace

GradientCheckReport gradient_check_report(const LossFunction& loss, ParameterSet& params,
                                          const GradientCheckOptions& options) {
  if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-4)) {
    throw ConfigError("gradient check epsilon must lie in [1e-7, 1e-4]");
  }
  params.zero_grad();
  checked(loss(params, true));

  // Snapshot the analytic gradient before the perturbed evaluations.
  std::vector<std::vector<double>> analytic;
  for (auto& [name, t] : params) analytic.emplace_back(t.grad().begin(), t.grad().end());

  std::mt19937_64 rng(options.seed);
  GradientCheckReport report;
  std::size_t ti = 0;
  for (auto& [name, t] : params) {
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.samples_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.samples_per_tensor);
    }
    for (std::size_t i : coords) {
      const double saved = t[i];
      t[i] = saved + options.epsilon;
      const double up = checked(loss(params, false));
      const std::uint64_t up_region = options.region ? options.region() : 0;
      t[i] = saved - options.epsilon;
      const double down = checked(loss(params, false));
      const std::uint64_t down_region = options.region ? options.region() : 0;
      t[i] = saved;
      if (up_region != down_region) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double a = analytic[ti][i];
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
      report.max_relative_error = std::max(report.max_relative_error, rel);
      ++report.checked;
    }
    ++ti;
  }
  return report;
}

double gradient_check(const LossFunction& loss, ParameterSet& params,
                      const GradientCheckOptions& options) {
  return gradient_check_report(loss, params, options).max_relative_error;
}

}  // namespace overmod::nn
