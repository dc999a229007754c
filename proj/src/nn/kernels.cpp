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

#include "overmod/nn/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

namespace overmod::nn::kernels {
namespace {

// Problems smaller than this many multiply-adds stay on the calling thread.
constexpr std::size_t kParallelWork = std::size_t{1} << 16;

using v4d = double __attribute__((vector_size(32)));

inline v4d load4(const double* p) {
  v4d r;
  std::memcpy(&r, p, sizeof(r));
  return r;
}

inline void store4(double* p, v4d v) { std::memcpy(p, &v, sizeof(v)); }

inline v4d splat(double x) { return v4d{x, x, x, x}; }

inline double hsum(v4d v) { return (v[0] + v[1]) + (v[2] + v[3]); }

inline void put(double* dst, double value, bool accumulate) {
  *dst = accumulate ? *dst + value : value;
}

inline void put4(double* dst, v4d value, bool accumulate) {
  store4(dst, accumulate ? load4(dst) + value : value);
}

// Four output rows of C = A * B where A(i, p) = a[i * ars + p * acs].
void rows4_strided(std::size_t i0, std::size_t n, std::size_t k, const double* a,
                   std::size_t ars, std::size_t acs, const double* b, double* c,
                   bool accumulate) {
  const double* a0 = a + (i0 + 0) * ars;
  const double* a1 = a + (i0 + 1) * ars;
  const double* a2 = a + (i0 + 2) * ars;
  const double* a3 = a + (i0 + 3) * ars;
  double* c0 = c + (i0 + 0) * n;
  double* c1 = c + (i0 + 1) * n;
  double* c2 = c + (i0 + 2) * n;
  double* c3 = c + (i0 + 3) * n;
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    v4d s00{}, s01{}, s10{}, s11{}, s20{}, s21{}, s30{}, s31{};
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n + j;
      const v4d b0 = load4(bp);
      const v4d b1 = load4(bp + 4);
      v4d x = splat(a0[p * acs]);
      s00 += x * b0;
      s01 += x * b1;
      x = splat(a1[p * acs]);
      s10 += x * b0;
      s11 += x * b1;
      x = splat(a2[p * acs]);
      s20 += x * b0;
      s21 += x * b1;
      x = splat(a3[p * acs]);
      s30 += x * b0;
      s31 += x * b1;
    }
    put4(c0 + j, s00, accumulate);
    put4(c0 + j + 4, s01, accumulate);
    put4(c1 + j, s10, accumulate);
    put4(c1 + j + 4, s11, accumulate);
    put4(c2 + j, s20, accumulate);
    put4(c2 + j + 4, s21, accumulate);
    put4(c3 + j, s30, accumulate);
    put4(c3 + j + 4, s31, accumulate);
  }
  for (; j < n; ++j) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double bv = b[p * n + j];
      s0 += a0[p * acs] * bv;
      s1 += a1[p * acs] * bv;
      s2 += a2[p * acs] * bv;
      s3 += a3[p * acs] * bv;
    }
    put(c0 + j, s0, accumulate);
    put(c1 + j, s1, accumulate);
    put(c2 + j, s2, accumulate);
    put(c3 + j, s3, accumulate);
  }
}

void row1_strided(std::size_t i, std::size_t n, std::size_t k, const double* a,
                  std::size_t ars, std::size_t acs, const double* b, double* c,
                  bool accumulate) {
  const double* ai = a + i * ars;
  double* ci = c + i * n;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    v4d s{};
    for (std::size_t p = 0; p < k; ++p) s += splat(ai[p * acs]) * load4(b + p * n + j);
    put4(ci + j, s, accumulate);
  }
  for (; j < n; ++j) {
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += ai[p * acs] * b[p * n + j];
    put(ci + j, s, accumulate);
  }
}

void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t ars, std::size_t acs, const double* b, double* c,
                  bool accumulate) {
  const auto blocks = static_cast<std::ptrdiff_t>((m + 3) / 4);
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * 4;
    if (i0 + 4 <= m) {
      rows4_strided(i0, n, k, a, ars, acs, b, c, accumulate);
    } else {
      for (std::size_t i = i0; i < m; ++i) row1_strided(i, n, k, a, ars, acs, b, c, accumulate);
    }
  }
}

double dot(const double* x, const double* y, std::size_t k) {
  v4d s{};
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) s += load4(x + p) * load4(y + p);
  double t = hsum(s);
  for (; p < k; ++p) t += x[p] * y[p];
  return t;
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  gemm_strided(m, n, k, a.data(), k, 1, b.data(), c.data(), accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  gemm_strided(m, n, k, a.data(), 1, m, b.data(), c.data(), accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  const auto blocks = static_cast<std::ptrdiff_t>((m + 3) / 4);
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * 4;
    if (i0 + 4 > m) {
      for (std::size_t i = i0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          put(cp + i * n + j, dot(ap + i * k, bp + j * k, k), accumulate);
        }
      }
      continue;
    }
    const double* a0 = ap + (i0 + 0) * k;
    const double* a1 = ap + (i0 + 1) * k;
    const double* a2 = ap + (i0 + 2) * k;
    const double* a3 = ap + (i0 + 3) * k;
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
      const double* b0 = bp + j * k;
      const double* b1 = bp + (j + 1) * k;
      v4d s00{}, s01{}, s10{}, s11{}, s20{}, s21{}, s30{}, s31{};
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const v4d y0 = load4(b0 + p);
        const v4d y1 = load4(b1 + p);
        v4d x = load4(a0 + p);
        s00 += x * y0;
        s01 += x * y1;
        x = load4(a1 + p);
        s10 += x * y0;
        s11 += x * y1;
        x = load4(a2 + p);
        s20 += x * y0;
        s21 += x * y1;
        x = load4(a3 + p);
        s30 += x * y0;
        s31 += x * y1;
      }
      double t00 = hsum(s00), t01 = hsum(s01), t10 = hsum(s10), t11 = hsum(s11);
      double t20 = hsum(s20), t21 = hsum(s21), t30 = hsum(s30), t31 = hsum(s31);
      for (; p < k; ++p) {
        t00 += a0[p] * b0[p];
        t01 += a0[p] * b1[p];
        t10 += a1[p] * b0[p];
        t11 += a1[p] * b1[p];
        t20 += a2[p] * b0[p];
        t21 += a2[p] * b1[p];
        t30 += a3[p] * b0[p];
        t31 += a3[p] * b1[p];
      }
      put(cp + (i0 + 0) * n + j, t00, accumulate);
      put(cp + (i0 + 0) * n + j + 1, t01, accumulate);
      put(cp + (i0 + 1) * n + j, t10, accumulate);
      put(cp + (i0 + 1) * n + j + 1, t11, accumulate);
      put(cp + (i0 + 2) * n + j, t20, accumulate);
      put(cp + (i0 + 2) * n + j + 1, t21, accumulate);
      put(cp + (i0 + 3) * n + j, t30, accumulate);
      put(cp + (i0 + 3) * n + j + 1, t31, accumulate);
    }
    for (; j < n; ++j) {
      for (std::size_t i = i0; i < i0 + 4; ++i) {
        put(cp + i * n + j, dot(ap + i * k, bp + j * k, k), accumulate);
      }
    }
  }
}

void im2col_3x3(std::span<const double> in, std::size_t channels, std::size_t h,
                std::size_t w, std::span<double> col) {
  const double* src = in.data();
  double* dst = col.data();
  const auto nc = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static) if (channels * h * w * 9 >= kParallelWork)
  for (std::ptrdiff_t ci = 0; ci < nc; ++ci) {
    const double* plane = src + static_cast<std::size_t>(ci) * h * w;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = dst + ((static_cast<std::size_t>(ci) * 3 + ky) * 3 + kx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          double* out = row + y * w;
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(out, out + w, 0.0);
            continue;
          }
          const double* line = plane + static_cast<std::size_t>(yy) * w;
          // Shifted copy of one input row; kx = 0 and kx = 2 lose one edge.
          if (kx == 0) {
            out[0] = 0.0;
            std::copy(line, line + w - 1, out + 1);
          } else if (kx == 1) {
            std::copy(line, line + w, out);
          } else {
            std::copy(line + 1, line + w, out);
            out[w - 1] = 0.0;
          }
        }
      }
    }
  }
}

void col2im_3x3(std::span<const double> col, std::size_t channels, std::size_t h,
                std::size_t w, std::span<double> in_grad) {
  const double* src = col.data();
  double* dst = in_grad.data();
  const auto nc = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static) if (channels * h * w * 9 >= kParallelWork)
  for (std::ptrdiff_t ci = 0; ci < nc; ++ci) {
    double* plane = dst + static_cast<std::size_t>(ci) * h * w;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = src + ((static_cast<std::size_t>(ci) * 3 + ky) * 3 + kx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
          const double* g = row + y * w;
          double* line = plane + static_cast<std::size_t>(yy) * w;
          if (kx == 0) {
            for (std::size_t x = 1; x < w; ++x) line[x - 1] += g[x];
          } else if (kx == 1) {
            for (std::size_t x = 0; x < w; ++x) line[x] += g[x];
          } else {
            for (std::size_t x = 0; x + 1 < w; ++x) line[x + 1] += g[x];
          }
        }
      }
    }
  }
}

void maxpool_2x2(std::span<const double> in, std::size_t channels, std::size_t h,
                 std::size_t w, std::span<double> out, std::span<std::int32_t> argmax) {
  const std::size_t ho = h / 2;
  const std::size_t wo = w / 2;
  const auto nc = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static) if (channels * h * w >= kParallelWork)
  for (std::ptrdiff_t ci = 0; ci < nc; ++ci) {
    const double* plane = in.data() + static_cast<std::size_t>(ci) * h * w;
    double* o = out.data() + static_cast<std::size_t>(ci) * ho * wo;
    std::int32_t* am = argmax.data() + static_cast<std::size_t>(ci) * ho * wo;
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        const std::size_t base = 2 * y * w + 2 * x;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (std::size_t q = 1; q < 4; ++q) {
          if (plane[cand[q]] > plane[best]) best = cand[q];
        }
        o[y * wo + x] = plane[best];
        am[y * wo + x] = static_cast<std::int32_t>(best);
      }
    }
  }
}

void maxpool_2x2_backward(std::span<const double> out_grad,
                          std::span<const std::int32_t> argmax, std::size_t channels,
                          std::size_t h, std::size_t w, std::span<double> in_grad) {
  const std::size_t plane_out = (h / 2) * (w / 2);
  const auto nc = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static) if (channels * h * w >= kParallelWork)
  for (std::ptrdiff_t ci = 0; ci < nc; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    double* plane = in_grad.data() + c * h * w;
    for (std::size_t q = 0; q < plane_out; ++q) {
      plane[argmax[c * plane_out + q]] += out_grad[c * plane_out + q];
    }
  }
}

namespace reference {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void im2col_3x3(std::span<const double> in, std::size_t channels, std::size_t h,
                std::size_t w, std::span<double> col) {
  for (std::size_t ci = 0; ci < channels; ++ci) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const std::size_t row = (ci * 3 + ky) * 3 + kx;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const auto yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            const auto xx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            const bool inside = yy >= 0 && xx >= 0 && yy < static_cast<std::ptrdiff_t>(h) &&
                                xx < static_cast<std::ptrdiff_t>(w);
            col[row * h * w + y * w + x] =
                inside ? in[ci * h * w + static_cast<std::size_t>(yy) * w +
                            static_cast<std::size_t>(xx)]
                       : 0.0;
          }
        }
      }
    }
  }
}

void col2im_3x3(std::span<const double> col, std::size_t channels, std::size_t h,
                std::size_t w, std::span<double> in_grad) {
  for (std::size_t ci = 0; ci < channels; ++ci) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const std::size_t row = (ci * 3 + ky) * 3 + kx;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const auto yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            const auto xx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) ||
                xx >= static_cast<std::ptrdiff_t>(w)) {
              continue;
            }
            in_grad[ci * h * w + static_cast<std::size_t>(yy) * w +
                    static_cast<std::size_t>(xx)] += col[row * h * w + y * w + x];
          }
        }
      }
    }
  }
}

void maxpool_2x2(std::span<const double> in, std::size_t channels, std::size_t h,
                 std::size_t w, std::span<double> out, std::span<std::int32_t> argmax) {
  const std::size_t ho = h / 2;
  const std::size_t wo = w / 2;
  for (std::size_t ci = 0; ci < channels; ++ci) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_at = 0;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t at = (2 * y + dy) * w + 2 * x + dx;
            if (in[ci * h * w + at] > best) {
              best = in[ci * h * w + at];
              best_at = at;
            }
          }
        }
        out[ci * ho * wo + y * wo + x] = best;
        argmax[ci * ho * wo + y * wo + x] = static_cast<std::int32_t>(best_at);
      }
    }
  }
}

void maxpool_2x2_backward(std::span<const double> out_grad,
                          std::span<const std::int32_t> argmax, std::size_t channels,
                          std::size_t h, std::size_t w, std::span<double> in_grad) {
  const std::size_t plane_out = (h / 2) * (w / 2);
  for (std::size_t ci = 0; ci < channels; ++ci) {
    for (std::size_t q = 0; q < plane_out; ++q) {
      in_grad[ci * h * w + static_cast<std::size_t>(argmax[ci * plane_out + q])] +=
          out_grad[ci * plane_out + q];
    }
  }
}

}  // namespace reference
}  // namespace overmod::nn::kernels
