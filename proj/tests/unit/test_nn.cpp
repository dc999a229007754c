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

#include <omp.h>

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "gradient_suite.hpp"
#include "overmod/error.hpp"
#include "overmod/nn/adam.hpp"
#include "overmod/nn/checkpoint.hpp"
#include "overmod/nn/kernels.hpp"
#include "overmod/nn/loss.hpp"

using namespace overmod;
using overmod::testing::random_vector;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("gemm kernels agree with the serial reference") {
  struct Dims { std::size_t m, n, k; };
  for (Dims d : {Dims{1, 1, 1}, Dims{5, 7, 3}, Dims{16, 256, 27}, Dims{33, 17, 65}, Dims{64, 64, 288}}) {
    const auto a = random_vector(d.m * d.k, 1);
    const auto b = random_vector(d.k * d.n, 2);
    const auto seed_c = random_vector(d.m * d.n, 3);
    for (bool acc : {false, true}) {
      std::vector<double> fast = seed_c, ref = seed_c;
      nn::kernels::gemm_nn(d.m, d.n, d.k, a, b, fast, acc);
      nn::kernels::reference::gemm_nn(d.m, d.n, d.k, a, b, ref, acc);
      CHECK(max_abs_diff(fast, ref) < 1e-12);

      const auto bt = random_vector(d.n * d.k, 4);
      fast = seed_c;
      ref = seed_c;
      nn::kernels::gemm_nt(d.m, d.n, d.k, a, bt, fast, acc);
      nn::kernels::reference::gemm_nt(d.m, d.n, d.k, a, bt, ref, acc);
      CHECK(max_abs_diff(fast, ref) < 1e-12);

      const auto at = random_vector(d.k * d.m, 5);
      fast = seed_c;
      ref = seed_c;
      nn::kernels::gemm_tn(d.m, d.n, d.k, at, b, fast, acc);
      nn::kernels::reference::gemm_tn(d.m, d.n, d.k, at, b, ref, acc);
      CHECK(max_abs_diff(fast, ref) < 1e-12);
    }
  }
}

TEST_CASE("gemm_nn matches a hand-computed product") {
  const std::vector<double> a = {1, 2, 3, 4, 5, 6};       // 2 x 3
  const std::vector<double> b = {7, 8, 9, 10, 11, 12};    // 3 x 2
  std::vector<double> c(4);
  nn::kernels::gemm_nn(2, 2, 3, a, b, c, false);
  CHECK(c == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("im2col, col2im and pooling agree with the reference") {
  for (std::size_t side : {2, 8, 16, 64}) {
    const std::size_t ch = 3;
    const auto in = random_vector(ch * side * side, 6);
    std::vector<double> fast(ch * 9 * side * side), ref(fast.size());
    nn::kernels::im2col_3x3(in, ch, side, side, fast);
    nn::kernels::reference::im2col_3x3(in, ch, side, side, ref);
    CHECK(fast == ref);

    const auto col = random_vector(fast.size(), 7);
    std::vector<double> g1(in.size(), 0.5), g2(in.size(), 0.5);
    nn::kernels::col2im_3x3(col, ch, side, side, g1);
    nn::kernels::reference::col2im_3x3(col, ch, side, side, g2);
    CHECK(max_abs_diff(g1, g2) < 1e-12);

    const std::size_t pooled = ch * (side / 2) * (side / 2);
    std::vector<double> p1(pooled), p2(pooled);
    std::vector<std::int32_t> a1(pooled), a2(pooled);
    nn::kernels::maxpool_2x2(in, ch, side, side, p1, a1);
    nn::kernels::reference::maxpool_2x2(in, ch, side, side, p2, a2);
    CHECK(p1 == p2);
    CHECK(a1 == a2);

    const auto up = random_vector(pooled, 8);
    std::vector<double> b1(in.size(), 0.0), b2(in.size(), 0.0);
    nn::kernels::maxpool_2x2_backward(up, a1, ch, side, side, b1);
    nn::kernels::reference::maxpool_2x2_backward(up, a2, ch, side, side, b2);
    CHECK(b1 == b2);
  }
}

TEST_CASE("im2col is the adjoint of col2im") {
  const std::size_t ch = 2, side = 6;
  const auto x = random_vector(ch * side * side, 9);
  const auto y = random_vector(ch * 9 * side * side, 10);
  std::vector<double> col(y.size()), back(x.size(), 0.0);
  nn::kernels::im2col_3x3(x, ch, side, side, col);
  nn::kernels::col2im_3x3(y, ch, side, side, back);
  const double lhs = std::inner_product(col.begin(), col.end(), y.begin(), 0.0);
  const double rhs = std::inner_product(x.begin(), x.end(), back.begin(), 0.0);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("maxpool keeps the first maximum on ties") {
  const std::vector<double> in = {1, 1, 1, 1};
  std::vector<double> out(1);
  std::vector<std::int32_t> arg(1);
  nn::kernels::maxpool_2x2(in, 1, 2, 2, out, arg);
  CHECK(out[0] == 1.0);
  CHECK(arg[0] == 0);
}

// Direct convolution, ReLU, pooling and projection, written from the layer
// definitions without im2col or the kernels.
TEST_CASE("image encoder matches a direct convolution oracle") {
  nn::EncoderConfig cfg;
  cfg.image_side = 8;
  cfg.channels = {4, 3};
  cfg.embed_dim = 6;
  nn::ImageEncoder enc(cfg, "image");
  nn::ParameterSet params;
  nn::Rng rng(3);
  enc.register_parameters(params, rng);
  testing::randomize_biases(params, 3);
  const std::size_t batch = 2;
  const auto images = random_vector(batch * cfg.image_values(), 12, 0.0, 1.0);
  std::vector<double> out(batch * cfg.embed_dim);
  enc.forward(params, images, batch, out);

  for (std::size_t n = 0; n < batch; ++n) {
    // CHW copy of image n.
    std::size_t side = cfg.image_side, cin = 3;
    std::vector<double> x(3 * side * side);
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t xx = 0; xx < side; ++xx) {
        for (std::size_t c = 0; c < 3; ++c) {
          x[(c * side + y) * side + xx] = images[n * cfg.image_values() + (y * side + xx) * 3 + c];
        }
      }
    }
    for (std::size_t b = 0; b < cfg.channels.size(); ++b) {
      const std::size_t cout = cfg.channels[b];
      const auto w = params.at("image.conv" + std::to_string(b) + ".weight").data();
      const auto bias = params.at("image.conv" + std::to_string(b) + ".bias").data();
      std::vector<double> act(cout * side * side);
      for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t y = 0; y < side; ++y) {
          for (std::size_t xx = 0; xx < side; ++xx) {
            double s = bias[o];
            for (std::size_t c = 0; c < cin; ++c) {
              for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                  const int sy = static_cast<int>(y) + ky - 1, sx = static_cast<int>(xx) + kx - 1;
                  if (sy < 0 || sx < 0 || sy >= static_cast<int>(side) || sx >= static_cast<int>(side)) continue;
                  s += w[((o * cin + c) * 3 + ky) * 3 + kx] * x[(c * side + sy) * side + sx];
                }
              }
            }
            act[(o * side + y) * side + xx] = std::max(0.0, s);
          }
        }
      }
      const std::size_t half = side / 2;
      std::vector<double> pooled(cout * half * half);
      for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t y = 0; y < half; ++y) {
          for (std::size_t xx = 0; xx < half; ++xx) {
            double m = -1e300;
            for (std::size_t dy = 0; dy < 2; ++dy) {
              for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, act[(o * side + 2 * y + dy) * side + 2 * xx + dx]);
            }
            pooled[(o * half + y) * half + xx] = m;
          }
        }
      }
      x = pooled;
      side = half;
      cin = cout;
    }
    const auto pw = params.at("image.proj.weight").data();
    const auto pb = params.at("image.proj.bias").data();
    for (std::size_t o = 0; o < cfg.embed_dim; ++o) {
      double s = pb[o];
      for (std::size_t i = 0; i < x.size(); ++i) s += pw[o * x.size() + i] * x[i];
      CHECK(std::abs(out[n * cfg.embed_dim + o] - s) < 1e-9);
    }
  }
}

TEST_CASE("image encoder output does not depend on the thread count") {
  const auto cfg = testing::tiny_encoder();
  nn::ImageEncoder enc(cfg, "image");
  nn::ParameterSet params;
  nn::Rng rng(4);
  enc.register_parameters(params, rng);
  const auto images = testing::tiny_images(6, 4);
  std::vector<double> one(6 * cfg.embed_dim), many(one.size());
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  enc.forward(params, images, 6, one);
  omp_set_num_threads(4);
  enc.forward(params, images, 6, many);
  omp_set_num_threads(saved);
  CHECK(one == many);
}

TEST_CASE("GRU cell matches the gate equations") {
  const std::size_t in = 3, hid = 2;
  nn::GruCell cell("gru", in, hid);
  nn::ParameterSet params;
  nn::Rng rng(5);
  cell.register_parameters(params, rng);
  testing::randomize_biases(params, 5);
  const auto x = random_vector(in, 13);
  const auto h = random_vector(hid, 14);
  nn::GruCell::Record rec;
  cell.step(params, x, h, rec);

  const auto wi = params.at("gru.w_ih").data();
  const auto wh = params.at("gru.w_hh").data();
  const auto bi = params.at("gru.b_ih").data();
  const auto bh = params.at("gru.b_hh").data();
  auto row = [&](std::span<const double> w, std::size_t r, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) s += w[r * v.size() + j] * v[j];
    return s;
  };
  for (std::size_t k = 0; k < hid; ++k) {
    const double r = 1.0 / (1.0 + std::exp(-(row(wi, k, x) + bi[k] + row(wh, k, h) + bh[k])));
    const double z = 1.0 / (1.0 + std::exp(-(row(wi, hid + k, x) + bi[hid + k] + row(wh, hid + k, h) + bh[hid + k])));
    const double n = std::tanh(row(wi, 2 * hid + k, x) + bi[2 * hid + k] + r * (row(wh, 2 * hid + k, h) + bh[2 * hid + k]));
    CHECK(rec.h[k] == doctest::Approx((1.0 - z) * n + z * h[k]).epsilon(1e-12));
  }
}

TEST_CASE("parameters start uniform in +-1/sqrt(fan_in) with zero biases") {
  nn::Linear layer("lin", 16, 8);
  nn::ParameterSet params;
  nn::Rng rng(6);
  layer.register_parameters(params, rng);
  const auto w = params.at("lin.weight").data();
  double lo = 1.0, hi = -1.0;
  for (double v : w) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= -0.25);
  CHECK(hi <= 0.25);
  CHECK(hi - lo > 0.3);
  for (double v : params.at("lin.bias").data()) CHECK(v == 0.0);
}

TEST_CASE("every layer and both models pass the gradient check") {
  for (const auto& c : testing::gradient_cases()) {
    for (std::uint64_t seed : testing::kGradientSeeds) {
      const auto r = c.run(seed);
      INFO(c.name << " seed " << seed << " relative error " << r.max_relative_error << " over " << r.checked
                  << " coordinates, " << r.skipped_kinks << " kinks skipped");
      CHECK(testing::gradient_case_passes(r));
    }
  }
}

TEST_CASE("gradient check rejects a wrong gradient and bad settings") {
  nn::ParameterSet params;
  params.add("x", {2});
  params.at("x")[0] = 1.0;
  params.at("x")[1] = -2.0;
  nn::LossFunction wrong = [](nn::ParameterSet& p, bool grad) {
    auto x = p.at("x").data();
    if (grad) {
      p.at("x").grad()[0] += 2.0 * x[0];
      p.at("x").grad()[1] += 3.0 * x[1];  // should be 2 x
    }
    return x[0] * x[0] + x[1] * x[1];
  };
  CHECK(nn::gradient_check(wrong, params) > 0.1);
  nn::GradientCheckOptions bad;
  bad.epsilon = 1e-2;
  CHECK_THROWS_AS(nn::gradient_check(wrong, params, bad), ConfigError);
  nn::LossFunction nan = [](nn::ParameterSet&, bool) { return std::nan(""); };
  CHECK_THROWS_AS(nn::gradient_check(nan, params), InputError);
}

TEST_CASE("gradient check skips coordinates that straddle a kink") {
  nn::ParameterSet params;
  params.add("x", {2});
  params.at("x")[0] = 0.0;  // |x| has its kink here
  params.at("x")[1] = 0.5;
  nn::LossFunction abs_loss = [](nn::ParameterSet& p, bool grad) {
    auto x = p.at("x").data();
    if (grad) {
      p.at("x").grad()[0] += x[0] > 0.0 ? 1.0 : -1.0;
      p.at("x").grad()[1] += x[1] > 0.0 ? 1.0 : -1.0;
    }
    return std::abs(x[0]) + std::abs(x[1]);
  };
  CHECK(nn::gradient_check(abs_loss, params) > 0.5);
  nn::GradientCheckOptions opts;
  opts.region = [&params] { return static_cast<std::uint64_t>(params.at("x")[0] > 0.0); };
  const auto r = nn::gradient_check_report(abs_loss, params, opts);
  CHECK(r.skipped_kinks == 1);
  CHECK(r.checked == 1);
  CHECK(r.max_relative_error < 1e-9);
}

TEST_CASE("loss functions") {
  CHECK(nn::sigmoid(0.0) == 0.5);
  CHECK(nn::sigmoid(800.0) == 1.0);
  CHECK(nn::sigmoid(-800.0) == doctest::Approx(0.0));
  CHECK(nn::bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)));
  CHECK(nn::bce_loss(0.5, 0) == doctest::Approx(std::log(2.0)));
  CHECK(std::isfinite(nn::bce_loss(0.0, 1)));
  CHECK(nn::bce_loss(0.0, 1) == doctest::Approx(-std::log(nn::kProbabilityFloor)));

  const std::vector<double> big = {1000.0, 1000.0};
  CHECK(nn::log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  const std::vector<double> uniform(5, 0.3);
  CHECK(nn::cross_entropy_loss(uniform, 2) == doctest::Approx(std::log(5.0)));

  const std::vector<double> logits = {0.5, -1.0, 2.0};
  const auto p = nn::softmax(logits);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  std::vector<double> g(3, 0.0);
  nn::cross_entropy_backward(logits, 1, 2.0, g);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(2.0 * (p[i] - (i == 1 ? 1.0 : 0.0))));
}

TEST_CASE("Adam matches the bias-corrected update rule") {
  nn::ParameterSet params;
  params.add("w", {2});
  params.at("w")[0] = 1.0;
  params.at("w")[1] = -1.0;
  nn::AdamState st;
  st.learning_rate = 0.1;
  const std::vector<std::vector<double>> grads = {{0.5, -2.0}, {-0.25, 1.0}};
  double m[2] = {0, 0}, v[2] = {0, 0}, w[2] = {1.0, -1.0};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    params.zero_grad();
    for (std::size_t i = 0; i < 2; ++i) params.at("w").grad()[i] = grads[t - 1][i];
    nn::adam_update(params, st);
    for (std::size_t i = 0; i < 2; ++i) {
      const double g = grads[t - 1][i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1.0 - std::pow(0.9, static_cast<double>(t)));
      const double vh = v[i] / (1.0 - std::pow(0.999, static_cast<double>(t)));
      w[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(params.at("w")[i] == doctest::Approx(w[i]).epsilon(1e-12));
    }
  }
  CHECK(st.step == 2);
}

TEST_CASE("the first Adam step moves each coordinate by about the learning rate") {
  nn::ParameterSet params;
  params.add("w", {3});
  nn::AdamState st;
  st.learning_rate = 0.01;
  params.zero_grad();
  params.at("w").grad()[0] = 1e-3;
  params.at("w").grad()[1] = -50.0;
  nn::adam_update(params, st);
  CHECK(params.at("w")[0] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(params.at("w")[1] == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(params.at("w")[2] == 0.0);
}

TEST_CASE("checkpoints round-trip byte for byte") {
  semantics::SemanticModel model(testing::tiny_encoder(), 9);
  const auto meta = model.checkpoint_metadata("eval-listener");
  const std::string bytes = nn::encode_checkpoint(model.params(), meta);
  const auto back = nn::decode_checkpoint(bytes);
  CHECK(back.metadata == meta);
  CHECK(back.params.same_values(model.params()));
  CHECK(nn::encode_checkpoint(back.params, back.metadata) == bytes);

  const auto restored = semantics::SemanticModel::from_checkpoint(back);
  CHECK(restored.config() == model.config());
  CHECK(restored.params().same_values(model.params()));

  CHECK_THROWS_AS(nn::decode_checkpoint("garbage"), IoError);
  CHECK_THROWS_AS(nn::decode_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
  CHECK_THROWS_AS(nn::load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

TEST_CASE("loss examples") {
  CHECK(nn::bce_loss(0.9, 0) == doctest::Approx(2.302585).epsilon(1e-6));
  CHECK(nn::bce_loss(1.0 - 1e-10, 1) < 1e-9);
  const std::vector<double> flat(12, 0.7);
  CHECK(nn::cross_entropy_loss(flat, 4) == doctest::Approx(std::log(12.0)).epsilon(1e-12));
  std::vector<double> peaked(12, 0.0);
  peaked[3] = 20.0;
  CHECK(nn::cross_entropy_loss(peaked, 3) < 1e-6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto logits = random_vector(12, seed, -5.0, 5.0);
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    const std::size_t t = seed % 12;
    CHECK(nn::cross_entropy_loss(logits, t) == doctest::Approx(-std::log(std::exp(logits[t]) / z)).epsilon(1e-9));
  }
}

TEST_CASE("Adam descends a parabola and ignores zero gradients") {
  nn::ParameterSet params;
  params.add("x", {1});
  params.add("still", {2});
  params.at("x")[0] = 1.0;
  params.at("still")[0] = 0.25;
  params.at("still")[1] = -4.0;
  nn::AdamState st;
  st.learning_rate = 0.01;
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    params.zero_grad();
    params.at("x").grad()[0] = 2.0 * params.at("x")[0];
    nn::adam_update(params, st);
    const double now = std::abs(params.at("x")[0]);
    CHECK(now < prev);
    prev = now;
  }
  CHECK(prev < 1.0);
  CHECK(params.at("still")[0] == 0.25);
  CHECK(params.at("still")[1] == -4.0);
}

TEST_CASE("encoder edge cases") {
  const auto cfg = testing::tiny_encoder();
  nn::ImageEncoder enc(cfg, "image");
  nn::ParameterSet params;
  nn::Rng rng(21);
  enc.register_parameters(params, rng);
  std::vector<double> black(2 * cfg.image_values(), 0.0);
  std::vector<double> out(2 * cfg.embed_dim);
  enc.forward(params, black, 2, out);
  for (double v : out) CHECK(std::isfinite(v));
  for (std::size_t i = 0; i < cfg.embed_dim; ++i) CHECK(out[i] == out[cfg.embed_dim + i]);

  nn::UtteranceEncoder text(cfg, scene::kVocabularySize, "text");
  text.register_parameters(params, rng);
  testing::randomize_biases(params, 21);
  // One token: a single GRU step on its embedding from the zero state.
  std::vector<double> enc_out(cfg.embed_dim);
  const std::vector<std::size_t> one = {7};
  text.forward(params, one, enc_out);
  nn::GruCell cell("text.gru", cfg.token_dim, cfg.embed_dim);
  nn::Embedding emb("text", scene::kVocabularySize, cfg.token_dim);
  nn::GruCell::Record rec;
  cell.step(params, emb.lookup(params, 7), std::vector<double>(cfg.embed_dim, 0.0), rec);
  for (std::size_t i = 0; i < cfg.embed_dim; ++i) CHECK(enc_out[i] == rec.h[i]);

  std::vector<double> a(cfg.embed_dim), b(cfg.embed_dim);
  text.forward(params, std::vector<std::size_t>{0, 6}, a);  // red circle
  text.forward(params, std::vector<std::size_t>{6, 0}, b);  // circle red
  CHECK(a != b);
  CHECK_THROWS_AS(text.forward(params, std::vector<std::size_t>{}, a), InputError);
}

TEST_CASE("gradient checks through the losses") {
  // Linear layer, sigmoid and BCE: smooth, so the tight bound applies.
  nn::Linear layer("lin", 6, 1);
  nn::ParameterSet params;
  nn::Rng rng(31);
  layer.register_parameters(params, rng);
  testing::randomize_biases(params, 31);
  const auto x = random_vector(6, 32);
  nn::LossFunction bce = [&](nn::ParameterSet& p, bool grad) {
    std::vector<double> y(1), dx(6);
    layer.forward(p, x, y);
    const double prob = nn::sigmoid(y[0]);
    if (grad) {
      const std::vector<double> dy = {prob - 1.0};
      layer.backward(p, x, dy, dx);
    }
    return nn::bce_loss(prob, 1);
  };
  CHECK(nn::gradient_check(bce, params, testing::check_options(31)) < 1e-5);

  // Two GRU steps and an output layer scored by cross-entropy.
  nn::GruCell cell("gru", 3, 4);
  nn::Linear out("out", 4, 12);
  nn::ParameterSet p2;
  cell.register_parameters(p2, rng);
  out.register_parameters(p2, rng);
  testing::randomize_biases(p2, 33);
  const auto xs = random_vector(6, 34);
  nn::LossFunction ce = [&](nn::ParameterSet& p, bool grad) {
    std::vector<nn::GruCell::Record> recs(2);
    std::vector<double> h(4, 0.0);
    double loss = 0.0;
    std::vector<std::vector<double>> logits(2, std::vector<double>(12));
    const std::size_t targets[] = {5, 11};
    for (std::size_t t = 0; t < 2; ++t) {
      cell.step(p, std::span<const double>(xs).subspan(3 * t, 3), h, recs[t]);
      h = recs[t].h;
      out.forward(p, h, logits[t]);
      loss += nn::cross_entropy_loss(logits[t], targets[t]);
    }
    if (grad) {
      std::vector<double> dh(4, 0.0), dprev(4), dx(3), dlogit(12), dh_out(4);
      for (std::size_t t = 2; t-- > 0;) {
        std::fill(dlogit.begin(), dlogit.end(), 0.0);
        nn::cross_entropy_backward(logits[t], targets[t], 1.0, dlogit);
        out.backward(p, recs[t].h, dlogit, dh_out);
        for (std::size_t i = 0; i < 4; ++i) dh[i] += dh_out[i];
        cell.step_backward(p, recs[t], dh, dx, dprev);
        dh = dprev;
      }
    }
    return loss;
  };
  CHECK(nn::gradient_check(ce, p2, testing::check_options(35)) < 1e-3);
}
