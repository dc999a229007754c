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

#ifndef OVERMOD_NN_ENCODERS_HPP_
#define OVERMOD_NN_ENCODERS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "overmod/nn/layers.hpp"
#include "overmod/nn/tensor.hpp"

namespace overmod::nn {

struct EncoderConfig {
  std::size_t image_side = 64;
  std::vector<std::size_t> channels{16, 32, 64};
  std::size_t embed_dim = 64;
  std::size_t token_dim = 32;

  // Throws ConfigError unless embed_dim >= 1 and image_side is divisible by
  // 2^(number of conv blocks).
  void validate() const;
  std::size_t image_values() const { return image_side * image_side * 3; }
  std::size_t flat_features() const;

  bool operator==(const EncoderConfig&) const = default;
};

nlohmann::json to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

// Convolutional image encoder: per block a 3x3 convolution (padding 1),
// ReLU and 2x2 max pooling, then a linear map of the flattened features to
// embed_dim. Input images are H x W x 3 values in [0, 1], row-major.
class ImageEncoder {
 public:
  struct Cache {
    std::size_t batch = 0;
    std::vector<std::vector<double>> block_inputs;  // CHW, per block
    std::vector<std::vector<double>> activations;   // post-ReLU, per block
    std::vector<std::vector<std::int32_t>> argmax;  // pooling winners, per block
    std::vector<double> flat;                       // batch x flat_features
  };

  ImageEncoder() = default;
  ImageEncoder(EncoderConfig config, std::string prefix);

  void register_parameters(ParameterSet& params, Rng& rng) const;
  const EncoderConfig& config() const { return config_; }

  // `images` holds `batch` images back to back; `out` receives batch x d.
  // Parallel over the batch.
  void forward(const ParameterSet& params, std::span<const double> images, std::size_t batch,
               std::span<double> out, Cache* cache = nullptr) const;

  // Accumulates parameter gradients for the batch recorded in `cache`.
  void backward(ParameterSet& params, const Cache& cache,
                std::span<const double> grad_out) const;

 private:
  std::string conv_weight(std::size_t block) const;
  std::string conv_bias(std::size_t block) const;

  EncoderConfig config_;
  std::string prefix_;
};

// Fingerprint of the linear region the cached forward pass lies in: the
// ReLU on/off pattern and the pooling winners of every block. Two passes
// with equal signatures differ only smoothly.
std::uint64_t region_signature(const ImageEncoder::Cache& cache);

// Token embedding followed by a unidirectional GRU from the zero state; the
// encoding is the final hidden state (dimension embed_dim).
class UtteranceEncoder {
 public:
  struct Trace {
    std::vector<std::size_t> tokens;
    std::vector<GruCell::Record> steps;
  };

  UtteranceEncoder() = default;
  UtteranceEncoder(const EncoderConfig& config, std::size_t vocab, std::string prefix);

  void register_parameters(ParameterSet& params, Rng& rng) const;
  void forward(const ParameterSet& params, std::span<const std::size_t> tokens,
               std::span<double> out, Trace* trace = nullptr) const;
  void backward(ParameterSet& params, const Trace& trace,
                std::span<const double> grad_out) const;

  std::size_t vocab() const { return embedding_.vocab(); }
  std::size_t dim() const { return cell_.hidden_dim(); }

 private:
  Embedding embedding_;
  GruCell cell_;
};

}  // namespace overmod::nn

#endif  // OVERMOD_NN_ENCODERS_HPP_
