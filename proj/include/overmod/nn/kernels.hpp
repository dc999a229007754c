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

// Dense kernels behind the image encoder and the projection layers.
//
// Every kernel exists twice: the default version is register-blocked and
// OpenMP-parallel over output rows (or channels), and kernels::reference
// holds the plain serial loop it must agree with. Each output element is
// written by exactly one thread with a fixed summation order, so results do
// not depend on the thread count.
//
// All matrices are row-major. `accumulate` adds into C instead of
// overwriting it.

#ifndef OVERMOD_NN_KERNELS_HPP_
#define OVERMOD_NN_KERNELS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>

namespace overmod::nn::kernels {

// C[m x n] = A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// C[m x n] = A[m x k] * B[n x k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// C[m x n] = A[k x m]^T * B[k x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// 3x3 patches with zero padding 1. `in` is [channels x h x w]; `col` is
// [(channels * 9) x (h * w)] with rows ordered (channel, ky, kx).
void im2col_3x3(std::span<const double> in, std::size_t channels, std::size_t h,
                std::size_t w, std::span<double> col);

// Adjoint of im2col_3x3: scatters `col` back and adds into `in_grad`.
void col2im_3x3(std::span<const double> col, std::size_t channels, std::size_t h,
                std::size_t w, std::span<double> in_grad);

// 2x2 max pooling with stride 2. `argmax` receives the flat index within
// the channel plane of the winning input (first maximum on ties).
void maxpool_2x2(std::span<const double> in, std::size_t channels, std::size_t h,
                 std::size_t w, std::span<double> out, std::span<std::int32_t> argmax);

// Routes pooled gradients back to their argmax positions, adding into
// `in_grad` ([channels x h x w]).
void maxpool_2x2_backward(std::span<const double> out_grad,
                          std::span<const std::int32_t> argmax, std::size_t channels,
                          std::size_t h, std::size_t w, std::span<double> in_grad);

namespace reference {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void im2col_3x3(std::span<const double> in, std::size_t channels, std::size_t h,
                std::size_t w, std::span<double> col);
void col2im_3x3(std::span<const double> col, std::size_t channels, std::size_t h,
                std::size_t w, std::span<double> in_grad);
void maxpool_2x2(std::span<const double> in, std::size_t channels, std::size_t h,
                 std::size_t w, std::span<double> out, std::span<std::int32_t> argmax);
void maxpool_2x2_backward(std::span<const double> out_grad,
                          std::span<const std::int32_t> argmax, std::size_t channels,
                          std::size_t h, std::size_t w, std::span<double> in_grad);

}  // namespace reference
}  // namespace overmod::nn::kernels

#endif  // OVERMOD_NN_KERNELS_HPP_
