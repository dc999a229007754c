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

#include "overmod/nn/layers.hpp"

#include <cmath>

#include "overmod/error.hpp"
#include "overmod/nn/loss.hpp"

namespace overmod::nn {

void init_uniform_fan_in(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
}

Linear::Linear(std::string prefix, std::size_t in_dim, std::size_t out_dim)
    : weight_(prefix + ".weight"), bias_(prefix + ".bias"), in_dim_(in_dim), out_dim_(out_dim) {}

void Linear::register_parameters(ParameterSet& params, Rng& rng) const {
  init_uniform_fan_in(params.add(weight_, {out_dim_, in_dim_}), in_dim_, rng);
  params.add(bias_, {out_dim_});
}

void Linear::forward(const ParameterSet& params, std::span<const double> x,
                     std::span<double> y) const {
  if (x.size() != in_dim_ || y.size() != out_dim_) {
    throw ConfigError("linear layer " + weight_ + " expects " + std::to_string(in_dim_) +
                      " -> " + std::to_string(out_dim_));
  }
  const auto w = params.at(weight_).data();
  const auto b = params.at(bias_).data();
  for (std::size_t o = 0; o < out_dim_; ++o) {
    double s = b[o];
    const double* row = w.data() + o * in_dim_;
    for (std::size_t i = 0; i < in_dim_; ++i) s += row[i] * x[i];
    y[o] = s;
  }
}

void Linear::backward(ParameterSet& params, std::span<const double> x,
                      std::span<const double> dy, std::span<double> dx) const {
  Tensor& w = params.at(weight_);
  Tensor& b = params.at(bias_);
  auto gw = w.grad();
  auto gb = b.grad();
  for (std::size_t o = 0; o < out_dim_; ++o) {
    gb[o] += dy[o];
    double* row = gw.data() + o * in_dim_;
    for (std::size_t i = 0; i < in_dim_; ++i) row[i] += dy[o] * x[i];
  }
  if (!dx.empty()) {
    const auto wd = w.data();
    for (std::size_t i = 0; i < in_dim_; ++i) dx[i] = 0.0;
    for (std::size_t o = 0; o < out_dim_; ++o) {
      const double* row = wd.data() + o * in_dim_;
      for (std::size_t i = 0; i < in_dim_; ++i) dx[i] += row[i] * dy[o];
    }
  }
}

Embedding::Embedding(std::string prefix, std::size_t vocab, std::size_t dim)
    : weight_(prefix + ".embedding"), vocab_(vocab), dim_(dim) {}

void Embedding::register_parameters(ParameterSet& params, Rng& rng) const {
  init_uniform_fan_in(params.add(weight_, {vocab_, dim_}), vocab_, rng);
}

std::span<const double> Embedding::lookup(const ParameterSet& params, std::size_t id) const {
  if (id >= vocab_) {
    throw InputError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(vocab_));
  }
  return params.at(weight_).data().subspan(id * dim_, dim_);
}

void Embedding::backward(ParameterSet& params, std::size_t id,
                         std::span<const double> dy) const {
  auto g = params.at(weight_).grad().subspan(id * dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i) g[i] += dy[i];
}

GruCell::GruCell(std::string prefix, std::size_t input_dim, std::size_t hidden_dim)
    : w_ih_(prefix + ".w_ih"),
      w_hh_(prefix + ".w_hh"),
      b_ih_(prefix + ".b_ih"),
      b_hh_(prefix + ".b_hh"),
      input_dim_(input_dim),
      hidden_dim_(hidden_dim) {}

void GruCell::register_parameters(ParameterSet& params, Rng& rng) const {
  init_uniform_fan_in(params.add(w_ih_, {3 * hidden_dim_, input_dim_}), input_dim_, rng);
  init_uniform_fan_in(params.add(w_hh_, {3 * hidden_dim_, hidden_dim_}), hidden_dim_, rng);
  params.add(b_ih_, {3 * hidden_dim_});
  params.add(b_hh_, {3 * hidden_dim_});
}

void GruCell::step(const ParameterSet& params, std::span<const double> x,
                   std::span<const double> h_prev, Record& rec) const {
  const std::size_t hd = hidden_dim_;
  if (x.size() != input_dim_ || h_prev.size() != hd) {
    throw ConfigError("GRU cell " + w_ih_ + " input/hidden size mismatch");
  }
  const auto wi = params.at(w_ih_).data();
  const auto wh = params.at(w_hh_).data();
  const auto bi = params.at(b_ih_).data();
  const auto bh = params.at(b_hh_).data();

  std::vector<double> gi(3 * hd), gh(3 * hd);
  for (std::size_t o = 0; o < 3 * hd; ++o) {
    double s = bi[o];
    const double* row = wi.data() + o * input_dim_;
    for (std::size_t i = 0; i < input_dim_; ++i) s += row[i] * x[i];
    gi[o] = s;
    double t = bh[o];
    const double* hrow = wh.data() + o * hd;
    for (std::size_t i = 0; i < hd; ++i) t += hrow[i] * h_prev[i];
    gh[o] = t;
  }

  rec.x.assign(x.begin(), x.end());
  rec.h_prev.assign(h_prev.begin(), h_prev.end());
  rec.r.resize(hd);
  rec.z.resize(hd);
  rec.n.resize(hd);
  rec.hn.resize(hd);
  rec.h.resize(hd);
  for (std::size_t j = 0; j < hd; ++j) {
    rec.r[j] = sigmoid(gi[j] + gh[j]);
    rec.z[j] = sigmoid(gi[hd + j] + gh[hd + j]);
    rec.hn[j] = gh[2 * hd + j];
    rec.n[j] = std::tanh(gi[2 * hd + j] + rec.r[j] * rec.hn[j]);
    rec.h[j] = (1.0 - rec.z[j]) * rec.n[j] + rec.z[j] * h_prev[j];
  }
}

void GruCell::step_backward(ParameterSet& params, const Record& rec,
                            std::span<const double> dh, std::span<double> dx,
                            std::span<double> dh_prev) const {
  const std::size_t hd = hidden_dim_;
  std::vector<double> dgi(3 * hd), dgh(3 * hd);
  for (std::size_t j = 0; j < hd; ++j) {
    const double dn = dh[j] * (1.0 - rec.z[j]);
    const double dz = dh[j] * (rec.h_prev[j] - rec.n[j]);
    const double dn_pre = dn * (1.0 - rec.n[j] * rec.n[j]);
    const double dr = dn_pre * rec.hn[j];
    const double dr_pre = dr * rec.r[j] * (1.0 - rec.r[j]);
    const double dz_pre = dz * rec.z[j] * (1.0 - rec.z[j]);
    dgi[j] = dr_pre;
    dgi[hd + j] = dz_pre;
    dgi[2 * hd + j] = dn_pre;
    dgh[j] = dr_pre;
    dgh[hd + j] = dz_pre;
    dgh[2 * hd + j] = dn_pre * rec.r[j];
    dh_prev[j] = dh[j] * rec.z[j];
  }

  Tensor& wi = params.at(w_ih_);
  Tensor& wh = params.at(w_hh_);
  auto gwi = wi.grad();
  auto gwh = wh.grad();
  auto gbi = params.at(b_ih_).grad();
  auto gbh = params.at(b_hh_).grad();
  const auto wid = wi.data();
  const auto whd = wh.data();

  if (!dx.empty()) {
    for (std::size_t i = 0; i < input_dim_; ++i) dx[i] = 0.0;
  }
  for (std::size_t o = 0; o < 3 * hd; ++o) {
    gbi[o] += dgi[o];
    gbh[o] += dgh[o];
    double* gi_row = gwi.data() + o * input_dim_;
    const double* wi_row = wid.data() + o * input_dim_;
    for (std::size_t i = 0; i < input_dim_; ++i) {
      gi_row[i] += dgi[o] * rec.x[i];
      if (!dx.empty()) dx[i] += wi_row[i] * dgi[o];
    }
    double* gh_row = gwh.data() + o * hd;
    const double* wh_row = whd.data() + o * hd;
    for (std::size_t i = 0; i < hd; ++i) {
      gh_row[i] += dgh[o] * rec.h_prev[i];
      dh_prev[i] += wh_row[i] * dgh[o];
    }
  }
}

}  // namespace overmod::nn
