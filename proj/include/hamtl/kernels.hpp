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

#pragma once

// Hot loops behind the autograd ops. The default entry points are
// OpenMP-parallel; `reference::` holds plain serial versions kept for tests
// and the benchmark.
//
// Every parallel kernel partitions work so that each output element is
// written by exactly one thread and summed in a fixed order. Results are
// therefore bitwise identical for any thread count, and identical to the
// serial reference.

#include <cstddef>
#include <span>
#include <vector>

namespace hamtl::kernels {

// Strided view of a row-major matrix with leading dimension `ld`.
struct MatView {
  const double* data;
  std::size_t ld;
};

struct MutMatView {
  double* data;
  std::size_t ld;
};

// C (m x n) = [C +] op(A) * op(B), op(X) = X or X^T, inner dimension k.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          MatView a, MatView b, MutMatView c, bool accumulate);

// Packed-batch sequence layout: row b * steps + t holds position t of
// sequence b. lengths[b] <= steps counts the real (non-pad) positions.
struct SequenceLayout {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<std::size_t> lengths;

  std::size_t rows() const { return batch * steps; }
  bool active(std::size_t b, std::size_t t) const { return t < lengths[b]; }
};

// Intermediates saved by the GRU forward for backpropagation through time.
struct GruCache {
  std::vector<double> xw;      // rows x 3H: x W + b, gate blocks [z | r | h]
  std::vector<double> h_prev;  // rows x H: state entering each position
  std::vector<double> z;       // rows x H
  std::vector<double> r;       // rows x H
  std::vector<double> cand;    // rows x H: candidate state
  std::vector<double> rh;      // rows x H: r * h_prev
};

// One GRU direction over a packed batch. W: in x 3H, U: H x 3H, bias: 3H.
// Positions >= length emit zeros and leave the carried state untouched, so
// a reverse pass starts each sequence at its last real token.
void gru_sequence_forward(const SequenceLayout& layout, std::size_t input_size,
                          std::size_t hidden, bool reverse,
                          std::span<const double> x, std::span<const double> w,
                          std::span<const double> u, std::span<const double> bias,
                          std::span<double> out, GruCache& cache);

// Accumulates into dx, dw, du, dbias (any may be empty to skip).
void gru_sequence_backward(const SequenceLayout& layout, std::size_t input_size,
                           std::size_t hidden, bool reverse,
                           std::span<const double> x, std::span<const double> w,
                           std::span<const double> u, const GruCache& cache,
                           std::span<const double> dout, std::span<double> dx,
                           std::span<double> dw, std::span<double> du,
                           std::span<double> dbias);

// Masked scaled dot-product attention over packed Q, K, V (rows x d_model),
// split into `heads` column blocks. Keys at positions >= length get zero
// weight; query rows >= length produce zero output. probs receives
// batch x heads x steps x steps weights.
void masked_attention_forward(const SequenceLayout& layout, std::size_t d_model,
                              std::size_t heads, std::span<const double> q,
                              std::span<const double> k, std::span<const double> v,
                              std::span<double> out, std::span<double> probs);

void masked_attention_backward(const SequenceLayout& layout, std::size_t d_model,
                               std::size_t heads, std::span<const double> q,
                               std::span<const double> k, std::span<const double> v,
                               std::span<const double> probs,
                               std::span<const double> dout, std::span<double> dq,
                               std::span<double> dk, std::span<double> dv);

namespace reference {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          MatView a, MatView b, MutMatView c, bool accumulate);

}  // namespace reference

}  // namespace hamtl::kernels
