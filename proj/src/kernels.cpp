// Copyright 2026 The hamtl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hamtl/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace hamtl::kernels {

namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double elem(MatView m, bool trans, std::size_t r, std::size_t c) {
  return trans ? m.data[c * m.ld + r] : m.data[r * m.ld + c];
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          MatView a, MatView b, MutMatView c, bool accumulate) {
  const bool par = m * n * k >= kParallelWork && m > 1;
  if (!trans_b) {
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c.data + i * c.ld;
      if (!accumulate) std::fill(crow, crow + n, 0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = elem(a, trans_a, i, p);
        const double* brow = b.data + p * b.ld;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else {
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c.data + i * c.ld;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b.data + j * b.ld;
        double s = accumulate ? crow[j] : 0.0;
        if (trans_a) {
          for (std::size_t p = 0; p < k; ++p) s += a.data[p * a.ld + i] * brow[p];
        } else {
          const double* arow = a.data + i * a.ld;
          for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        }
        crow[j] = s;
      }
    }
  }
}

namespace reference {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          MatView a, MatView b, MutMatView c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = accumulate ? c.data[i * c.ld + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        s += elem(a, trans_a, i, p) * elem(b, trans_b, p, j);
      }
      c.data[i * c.ld + j] = s;
    }
  }
}

}  // namespace reference

void gru_sequence_forward(const SequenceLayout& layout, std::size_t input_size,
                          std::size_t hidden, bool reverse,
                          std::span<const double> x, std::span<const double> w,
                          std::span<const double> u, std::span<const double> bias,
                          std::span<double> out, GruCache& cache) {
  const std::size_t B = layout.batch, T = layout.steps, R = layout.rows();
  const std::size_t H = hidden, G = 3 * hidden;

  cache.xw.assign(R * G, 0.0);
  cache.h_prev.assign(R * H, 0.0);
  cache.z.assign(R * H, 0.0);
  cache.r.assign(R * H, 0.0);
  cache.cand.assign(R * H, 0.0);
  cache.rh.assign(R * H, 0.0);

  gemm(false, false, R, G, input_size, {x.data(), input_size}, {w.data(), G},
       {cache.xw.data(), G}, false);
#pragma omp parallel for schedule(static) if (R * G >= kParallelWork)
  for (std::size_t row = 0; row < R; ++row) {
    for (std::size_t j = 0; j < G; ++j) cache.xw[row * G + j] += bias[j];
  }

  std::vector<double> h(B * H, 0.0), hu(B * 2 * H), hh(B * H);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    gemm(false, false, B, 2 * H, H, {h.data(), H}, {u.data(), G}, {hu.data(), 2 * H},
         false);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t row = b * T + t;
      const double* xw = cache.xw.data() + row * G;
      for (std::size_t j = 0; j < H; ++j) {
        const double hp = h[b * H + j];
        const double zj = sigmoid(xw[j] + hu[b * 2 * H + j]);
        const double rj = sigmoid(xw[H + j] + hu[b * 2 * H + H + j]);
        cache.h_prev[row * H + j] = hp;
        cache.z[row * H + j] = zj;
        cache.r[row * H + j] = rj;
        cache.rh[row * H + j] = rj * hp;
      }
    }
    gemm(false, false, B, H, H, {cache.rh.data() + t * H, T * H}, {u.data() + 2 * H, G},
         {hh.data(), H}, false);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t row = b * T + t;
      const bool act = layout.active(b, t);
      const double* xw = cache.xw.data() + row * G;
      for (std::size_t j = 0; j < H; ++j) {
        const double c = std::tanh(xw[2 * H + j] + hh[b * H + j]);
        cache.cand[row * H + j] = c;
        if (act) {
          const double zj = cache.z[row * H + j];
          const double hn = (1.0 - zj) * h[b * H + j] + zj * c;
          h[b * H + j] = hn;
          out[row * H + j] = hn;
        } else {
          out[row * H + j] = 0.0;
        }
      }
    }
  }
}

void gru_sequence_backward(const SequenceLayout& layout, std::size_t input_size,
                           std::size_t hidden, bool reverse,
                           std::span<const double> x, std::span<const double> w,
                           std::span<const double> u, const GruCache& cache,
                           std::span<const double> dout, std::span<double> dx,
                           std::span<double> dw, std::span<double> du,
                           std::span<double> dbias) {
  const std::size_t B = layout.batch, T = layout.steps, R = layout.rows();
  const std::size_t H = hidden, G = 3 * hidden;

  std::vector<double> dxw(R * G, 0.0);
  std::vector<double> dh(B * H, 0.0), dh_next(B * H), dah(B * H), drh(B * H);
  std::vector<double> dz(B * H), dazr(B * 2 * H);

  for (std::size_t s = T; s-- > 0;) {
    const std::size_t t = reverse ? T - 1 - s : s;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t row = b * T + t;
      const bool act = layout.active(b, t);
      for (std::size_t j = 0; j < H; ++j) {
        const std::size_t bj = b * H + j;
        if (!act) {
          dh_next[bj] = dh[bj];
          dah[bj] = 0.0;
          dz[bj] = 0.0;
          continue;
        }
        const std::size_t rj = row * H + j;
        const double g = dh[bj] + dout[rj];
        const double zj = cache.z[rj], cj = cache.cand[rj], hp = cache.h_prev[rj];
        dh_next[bj] = g * (1.0 - zj);
        dz[bj] = g * (cj - hp);
        const double da_h = g * zj * (1.0 - cj * cj);
        dah[bj] = da_h;
        dxw[row * G + 2 * H + j] = da_h;
      }
    }
    gemm(false, true, B, H, H, {dah.data(), H}, {u.data() + 2 * H, G}, {drh.data(), H},
         false);
    if (!du.empty()) {
      gemm(true, false, H, H, B, {cache.rh.data() + t * H, T * H}, {dah.data(), H},
           {du.data() + 2 * H, G}, true);
    }
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t row = b * T + t;
      const bool act = layout.active(b, t);
      for (std::size_t j = 0; j < H; ++j) {
        const std::size_t bj = b * H + j;
        if (!act) {
          dazr[b * 2 * H + j] = 0.0;
          dazr[b * 2 * H + H + j] = 0.0;
          continue;
        }
        const std::size_t rj = row * H + j;
        const double zj = cache.z[rj], rr = cache.r[rj], hp = cache.h_prev[rj];
        dh_next[bj] += drh[bj] * rr;
        const double da_z = dz[bj] * zj * (1.0 - zj);
        const double da_r = drh[bj] * hp * rr * (1.0 - rr);
        dazr[b * 2 * H + j] = da_z;
        dazr[b * 2 * H + H + j] = da_r;
        dxw[row * G + j] = da_z;
        dxw[row * G + H + j] = da_r;
      }
    }
    gemm(false, true, B, H, 2 * H, {dazr.data(), 2 * H}, {u.data(), G},
         {dh_next.data(), H}, true);
    if (!du.empty()) {
      gemm(true, false, H, 2 * H, B, {cache.h_prev.data() + t * H, T * H},
           {dazr.data(), 2 * H}, {du.data(), G}, true);
    }
    dh.swap(dh_next);
  }

  if (!dbias.empty()) {
    for (std::size_t row = 0; row < R; ++row) {
      for (std::size_t j = 0; j < G; ++j) dbias[j] += dxw[row * G + j];
    }
  }
  if (!dw.empty()) {
    gemm(true, false, input_size, G, R, {x.data(), input_size}, {dxw.data(), G},
         {dw.data(), G}, true);
  }
  if (!dx.empty()) {
    gemm(false, true, R, input_size, G, {dxw.data(), G}, {w.data(), G},
         {dx.data(), input_size}, true);
  }
}

void masked_attention_forward(const SequenceLayout& layout, std::size_t d_model,
                              std::size_t heads, std::span<const double> q,
                              std::span<const double> k, std::span<const double> v,
                              std::span<double> out, std::span<double> probs) {
  const std::size_t B = layout.batch, T = layout.steps, D = d_model;
  const std::size_t dk = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const long long jobs = static_cast<long long>(B * heads);

#pragma omp parallel for schedule(static) if (B * heads * T * T * dk >= kParallelWork)
  for (long long job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / heads;
    const std::size_t hd = static_cast<std::size_t>(job) % heads;
    const std::size_t len = layout.lengths[b];
    const std::size_t col = hd * dk;
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t qi = (b * T + i) * D + col;
      double* p = probs.data() + ((b * heads + hd) * T + i) * T;
      std::fill(p, p + T, 0.0);
      double* o = out.data() + qi;
      std::fill(o, o + dk, 0.0);
      if (i >= len) continue;
      double mx = -INFINITY;
      for (std::size_t j = 0; j < len; ++j) {
        const std::size_t kj = (b * T + j) * D + col;
        double s = 0.0;
        for (std::size_t d = 0; d < dk; ++d) s += q[qi + d] * k[kj + d];
        p[j] = s * scale;
        mx = std::max(mx, p[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        p[j] = std::exp(p[j] - mx);
        total += p[j];
      }
      for (std::size_t j = 0; j < len; ++j) {
        p[j] /= total;
        const std::size_t vj = (b * T + j) * D + col;
        for (std::size_t d = 0; d < dk; ++d) o[d] += p[j] * v[vj + d];
      }
    }
  }
}

void masked_attention_backward(const SequenceLayout& layout, std::size_t d_model,
                               std::size_t heads, std::span<const double> q,
                               std::span<const double> k, std::span<const double> v,
                               std::span<const double> probs,
                               std::span<const double> dout, std::span<double> dq,
                               std::span<double> dk_out, std::span<double> dv) {
  const std::size_t B = layout.batch, T = layout.steps, D = d_model;
  const std::size_t dk = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const long long jobs = static_cast<long long>(B * heads);

#pragma omp parallel for schedule(static) if (B * heads * T * T * dk >= kParallelWork)
  for (long long job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / heads;
    const std::size_t hd = static_cast<std::size_t>(job) % heads;
    const std::size_t len = layout.lengths[b];
    const std::size_t col = hd * dk;
    std::vector<double> dp(len), ds(len);
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t qi = (b * T + i) * D + col;
      const double* p = probs.data() + ((b * heads + hd) * T + i) * T;
      double dot = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const std::size_t vj = (b * T + j) * D + col;
        double s = 0.0;
        for (std::size_t d = 0; d < dk; ++d) s += dout[qi + d] * v[vj + d];
        dp[j] = s;
        dot += p[j] * s;
      }
      for (std::size_t j = 0; j < len; ++j) {
        ds[j] = p[j] * (dp[j] - dot) * scale;
        const std::size_t kj = (b * T + j) * D + col;
        if (!dv.empty()) {
          for (std::size_t d = 0; d < dk; ++d) dv[kj + d] += p[j] * dout[qi + d];
        }
        if (!dq.empty()) {
          for (std::size_t d = 0; d < dk; ++d) dq[qi + d] += ds[j] * k[kj + d];
        }
        if (!dk_out.empty()) {
          for (std::size_t d = 0; d < dk; ++d) dk_out[kj + d] += ds[j] * q[qi + d];
        }
      }
    }
  }
}

}  // namespace hamtl::kernels
