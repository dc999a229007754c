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

// Shared fixtures for the unit tests.

#ifndef OVERMOD_TESTS_COMMON_FIXTURES_HPP_
#define OVERMOD_TESTS_COMMON_FIXTURES_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "overmod/nn/encoders.hpp"
#include "overmod/nn/tensor.hpp"
#include "overmod/scene/scene.hpp"

namespace overmod::testing {

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0,
                                         double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Zero biases put ReLU pre-activations exactly on the kink over a black
// background, where central differences are meaningless.
inline void randomize_biases(nn::ParameterSet& params, std::uint64_t seed) {
  for (auto& [name, t] : params) {
    const bool bias = name.ends_with("bias") || name.ends_with("b_ih") || name.ends_with("b_hh");
    if (!bias) continue;
    auto d = t.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = 0.3 * std::sin(1.7 * static_cast<double>(i) + 1.0 + static_cast<double>(seed));
    }
  }
}

// 16x16 frames with two conv blocks: small enough for finite differences.
inline nn::EncoderConfig tiny_encoder() {
  nn::EncoderConfig c;
  c.image_side = 16;
  c.channels = {3, 4};
  c.embed_dim = 5;
  c.token_dim = 3;
  return c;
}

inline scene::EnvironmentConfig tiny_environment(const std::string& preset = "uniform") {
  auto env = scene::EnvironmentConfig::preset(preset);
  env.image_side = 16;
  env.min_size = 4;
  env.max_size = 12;
  return env;
}

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("overmod-test-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace overmod::testing

#endif  // OVERMOD_TESTS_COMMON_FIXTURES_HPP_
