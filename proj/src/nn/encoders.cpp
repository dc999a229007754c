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

#include "overmod/nn/encoders.hpp"

#include <algorithm>

#include "overmod/error.hpp"
#include "overmod/nn/kernels.hpp"

namespace overmod::nn {
namespace {

// Inference without a caller-owned cache runs in chunks of this many images
// to bound activation memory.
constexpr std::size_t kInferenceChunk = 64;

std::size_t block_in_channels(const EncoderConfig& cfg, std::size_t b) {
  return b == 0 ? 3 : cfg.channels[b - 1];
}

}  // namespace

void EncoderConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("embedding dimension must be at least 1");
  if (token_dim < 1) throw ConfigError("token embedding dimension must be at least 1");
  if (channels.empty()) throw ConfigError("image encoder needs at least one conv block");
  for (std::size_t c : channels) {
    if (c < 1) throw ConfigError("conv channel counts must be positive");
  }
  const std::size_t div = std::size_t{1} << channels.size();
  if (image_side == 0 || image_side % div != 0) {
    throw ConfigError("image side " + std::to_string(image_side) + " is not divisible by " +
                      std::to_string(div));
  }
}

std::size_t EncoderConfig::flat_features() const {
  const std::size_t side = image_side >> channels.size();
  return channels.back() * side * side;
}

nlohmann::json to_json(const EncoderConfig& config) {
  return nlohmann::json{{"image_side", config.image_side},
                        {"channels", config.channels},
                        {"embed_dim", config.embed_dim},
                        {"token_dim", config.token_dim}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.image_side = j.at("image_side").get<std::size_t>();
  c.channels = j.at("channels").get<std::vector<std::size_t>>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.token_dim = j.at("token_dim").get<std::size_t>();
  c.validate();
  return c;
}

ImageEncoder::ImageEncoder(EncoderConfig config, std::string prefix)
    : config_(std::move(config)), prefix_(std::move(prefix)) {
  config_.validate();
}

std::string ImageEncoder::conv_weight(std::size_t block) const {
  return prefix_ + ".conv" + std::to_string(block) + ".weight";
}

std::string ImageEncoder::conv_bias(std::size_t block) const {
  return prefix_ + ".conv" + std::to_string(block) + ".bias";
}

void ImageEncoder::register_parameters(ParameterSet& params, Rng& rng) const {
  for (std::size_t b = 0; b < config_.channels.size(); ++b) {
    const std::size_t ci = block_in_channels(config_, b);
    const std::size_t co = config_.channels[b];
    init_uniform_fan_in(params.add(conv_weight(b), {co, ci, 3, 3}), ci * 9, rng);
    params.add(conv_bias(b), {co});
  }
  const std::size_t f = config_.flat_features();
  init_uniform_fan_in(params.add(prefix_ + ".proj.weight", {config_.embed_dim, f}), f, rng);
  params.add(prefix_ + ".proj.bias", {config_.embed_dim});
}

void ImageEncoder::forward(const ParameterSet& params, std::span<const double> images,
                           std::size_t batch, std::span<double> out, Cache* cache) const {
  const EncoderConfig& cfg = config_;
  const std::size_t d = cfg.embed_dim;
  if (images.size() != batch * cfg.image_values()) {
    throw ConfigError("image batch has " + std::to_string(images.size()) +
                      " values, expected " + std::to_string(batch) + " images of " +
                      std::to_string(cfg.image_side) + "x" + std::to_string(cfg.image_side) +
                      "x3");
  }
  if (out.size() != batch * d) throw ConfigError("image encoder output buffer size mismatch");

  if (cache == nullptr && batch > kInferenceChunk) {
    Cache scratch;
    for (std::size_t start = 0; start < batch; start += kInferenceChunk) {
      const std::size_t count = std::min(kInferenceChunk, batch - start);
      forward(params, images.subspan(start * cfg.image_values(), count * cfg.image_values()),
              count, out.subspan(start * d, count * d), &scratch);
    }
    return;
  }
  Cache scratch;
  Cache& c = cache != nullptr ? *cache : scratch;

  const std::size_t blocks = cfg.channels.size();
  const std::size_t f = cfg.flat_features();
  c.batch = batch;
  c.block_inputs.resize(blocks);
  c.activations.resize(blocks);
  c.argmax.resize(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t side = cfg.image_side >> b;
    c.block_inputs[b].resize(batch * block_in_channels(cfg, b) * side * side);
    c.activations[b].resize(batch * cfg.channels[b] * side * side);
    c.argmax[b].resize(batch * cfg.channels[b] * (side / 2) * (side / 2));
  }
  c.flat.resize(batch * f);

  const std::size_t s = cfg.image_side;
  const auto nb = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < nb; ++ni) {
    const auto n = static_cast<std::size_t>(ni);
    const double* img = images.data() + n * cfg.image_values();
    double* x0 = c.block_inputs[0].data() + n * 3 * s * s;
    for (std::size_t p = 0; p < s * s; ++p) {
      for (std::size_t ch = 0; ch < 3; ++ch) x0[ch * s * s + p] = img[p * 3 + ch];
    }
    std::vector<double> col;
    for (std::size_t b = 0; b < blocks; ++b) {
      const std::size_t ci = block_in_channels(cfg, b);
      const std::size_t co = cfg.channels[b];
      const std::size_t side = s >> b;
      const std::size_t plane = side * side;
      col.resize(ci * 9 * plane);
      std::span<const double> in(c.block_inputs[b].data() + n * ci * plane, ci * plane);
      kernels::im2col_3x3(in, ci, side, side, col);

      std::span<double> act(c.activations[b].data() + n * co * plane, co * plane);
      const auto bias = params.at(conv_bias(b)).data();
      for (std::size_t o = 0; o < co; ++o) {
        std::fill(act.begin() + static_cast<std::ptrdiff_t>(o * plane),
                  act.begin() + static_cast<std::ptrdiff_t>((o + 1) * plane), bias[o]);
      }
      kernels::gemm_nn(co, plane, ci * 9, params.at(conv_weight(b)).data(), col, act, true);
      for (double& v : act) v = v > 0.0 ? v : 0.0;

      const std::size_t pooled = co * (side / 2) * (side / 2);
      std::span<double> dest = b + 1 < blocks
                                   ? std::span<double>(c.block_inputs[b + 1].data() + n * pooled,
                                                       pooled)
                                   : std::span<double>(c.flat.data() + n * f, f);
      std::span<std::int32_t> am(c.argmax[b].data() + n * pooled, pooled);
      kernels::maxpool_2x2(act, co, side, side, dest, am);
    }
  }

  kernels::gemm_nt(batch, d, f, c.flat, params.at(prefix_ + ".proj.weight").data(), out, false);
  const auto pb = params.at(prefix_ + ".proj.bias").data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < d; ++o) out[n * d + o] += pb[o];
  }
}

void ImageEncoder::backward(ParameterSet& params, const Cache& c,
                            std::span<const double> grad_out) const {
  const EncoderConfig& cfg = config_;
  const std::size_t batch = c.batch;
  const std::size_t d = cfg.embed_dim;
  const std::size_t f = cfg.flat_features();
  if (grad_out.size() != batch * d) throw ConfigError("image encoder gradient size mismatch");

  Tensor& pw = params.at(prefix_ + ".proj.weight");
  kernels::gemm_tn(d, f, batch, grad_out, c.flat, pw.grad(), true);
  auto pb = params.at(prefix_ + ".proj.bias").grad();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < d; ++o) pb[o] += grad_out[n * d + o];
  }
  std::vector<double> upstream(batch * f);
  kernels::gemm_nn(batch, f, d, grad_out, pw.data(), upstream, false);

  const std::size_t s = cfg.image_side;
  for (std::size_t bi = cfg.channels.size(); bi-- > 0;) {
    const std::size_t ci = block_in_channels(cfg, bi);
    const std::size_t co = cfg.channels[bi];
    const std::size_t side = s >> bi;
    const std::size_t plane = side * side;
    const std::size_t pooled = co * (side / 2) * (side / 2);

    std::vector<double> dact(batch * co * plane, 0.0);
    const auto nb = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ni = 0; ni < nb; ++ni) {
      const auto n = static_cast<std::size_t>(ni);
      std::span<double> g(dact.data() + n * co * plane, co * plane);
      kernels::maxpool_2x2_backward(
          std::span<const double>(upstream.data() + n * pooled, pooled),
          std::span<const std::int32_t>(c.argmax[bi].data() + n * pooled, pooled), co, side,
          side, g);
      const double* a = c.activations[bi].data() + n * co * plane;
      for (std::size_t q = 0; q < co * plane; ++q) {
        if (a[q] <= 0.0) g[q] = 0.0;
      }
    }

    Tensor& w = params.at(conv_weight(bi));
    auto gb = params.at(conv_bias(bi)).grad();
    std::vector<double> prev;
    if (bi > 0) prev.assign(batch * ci * plane, 0.0);
    std::vector<double> col(ci * 9 * plane);
    std::vector<double> dcol(bi > 0 ? ci * 9 * plane : 0);
    for (std::size_t n = 0; n < batch; ++n) {
      std::span<const double> in(c.block_inputs[bi].data() + n * ci * plane, ci * plane);
      std::span<const double> g(dact.data() + n * co * plane, co * plane);
      kernels::im2col_3x3(in, ci, side, side, col);
      kernels::gemm_nt(co, ci * 9, plane, g, col, w.grad(), true);
      for (std::size_t o = 0; o < co; ++o) {
        double sum = 0.0;
        for (std::size_t q = 0; q < plane; ++q) sum += g[o * plane + q];
        gb[o] += sum;
      }
      if (bi > 0) {
        kernels::gemm_tn(ci * 9, plane, co, w.data(), g, dcol, false);
        kernels::col2im_3x3(dcol, ci, side, side,
                            std::span<double>(prev.data() + n * ci * plane, ci * plane));
      }
    }
    upstream = std::move(prev);
  }
}

std::uint64_t region_signature(const ImageEncoder::Cache& cache) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (const auto& act : cache.activations) {
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < act.size(); ++i) {
      word = (word << 1) | (act[i] > 0.0 ? 1u : 0u);
      if (i % 64 == 63) mix(word);
    }
    mix(word);
  }
  for (const auto& am : cache.argmax) {
    for (std::int32_t v : am) mix(static_cast<std::uint64_t>(v));
  }
  return h;
}

UtteranceEncoder::UtteranceEncoder(const EncoderConfig& config, std::size_t vocab,
                                   std::string prefix)
    : embedding_(prefix, vocab, config.token_dim),
      cell_(prefix + ".gru", config.token_dim, config.embed_dim) {}

void UtteranceEncoder::register_parameters(ParameterSet& params, Rng& rng) const {
  embedding_.register_parameters(params, rng);
  cell_.register_parameters(params, rng);
}

void UtteranceEncoder::forward(const ParameterSet& params, std::span<const std::size_t> tokens,
                               std::span<double> out, Trace* trace) const {
  if (tokens.empty()) throw InputError("utterance must contain at least one token");
  if (out.size() != cell_.hidden_dim()) throw ConfigError("utterance encoder output size mismatch");
  std::vector<double> h(cell_.hidden_dim(), 0.0);
  Trace local;
  Trace& t = trace != nullptr ? *trace : local;
  t.tokens.assign(tokens.begin(), tokens.end());
  t.steps.resize(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    cell_.step(params, embedding_.lookup(params, tokens[i]), h, t.steps[i]);
    h = t.steps[i].h;
  }
  std::copy(h.begin(), h.end(), out.begin());
}

void UtteranceEncoder::backward(ParameterSet& params, const Trace& trace,
                                std::span<const double> grad_out) const {
  std::vector<double> dh(grad_out.begin(), grad_out.end());
  std::vector<double> dh_prev(cell_.hidden_dim());
  std::vector<double> dx(cell_.input_dim());
  for (std::size_t i = trace.steps.size(); i-- > 0;) {
    cell_.step_backward(params, trace.steps[i], dh, dx, dh_prev);
    embedding_.backward(params, trace.tokens[i], dx);
    std::swap(dh, dh_prev);
  }
}

}  // namespace overmod::nn
