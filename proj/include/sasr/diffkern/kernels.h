// Copyright (c) 2026 SASR Authors
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

// Row-level numeric kernels shared by graph evaluation and the streaming
// forward pass. Every forward kernel computes each output row with a fixed
// summation order that does not depend on how many rows are processed in
// one call, so a chunked pass reproduces the batch pass bit for bit.

#ifndef SASR_DIFFKERN_KERNELS_H_
#define SASR_DIFFKERN_KERNELS_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace sasr::kernels {

// c[m x n] (+)= a[m x k] * b[k x n]. Row i of a starts at a + i * lda.
template <typename T>
void Gemm(const T* a, int lda, const T* b, T* c, int m, int k, int n,
          bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, T(0));
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + static_cast<size_t>(i) * lda;
    const T* a1 = a0 + lda;
    const T* a2 = a1 + lda;
    const T* a3 = a2 + lda;
    T* c0 = c + static_cast<size_t>(i) * n;
    T* c1 = c0 + n;
    T* c2 = c1 + n;
    T* c3 = c2 + n;
    for (int p = 0; p < k; ++p) {
      const T* brow = b + static_cast<size_t>(p) * n;
      const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      for (int j = 0; j < n; ++j) {
        const T bj = brow[j];
        c0[j] += v0 * bj;
        c1[j] += v1 * bj;
        c2[j] += v2 * bj;
        c3[j] += v3 * bj;
      }
    }
  }
  for (; i < m; ++i) {
    const T* ai = a + static_cast<size_t>(i) * lda;
    T* ci = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T* brow = b + static_cast<size_t>(p) * n;
      const T v = ai[p];
      for (int j = 0; j < n; ++j) ci[j] += v * brow[j];
    }
  }
}

// c[m x k] (+)= a[m x n] * b[k x n]^T.
template <typename T>
void GemmTransB(const T* a, const T* b, T* c, int m, int n, int k,
                bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<size_t>(i) * n;
    T* ci = c + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T* bp = b + static_cast<size_t>(p) * n;
      T s[8] = {};
      int j = 0;
      for (; j + 8 <= n; j += 8) {
        for (int q = 0; q < 8; ++q) s[q] += ai[j + q] * bp[j + q];
      }
      T tail = 0;
      for (; j < n; ++j) tail += ai[j] * bp[j];
      const T dot =
          ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7])) +
          tail;
      ci[p] = accumulate ? ci[p] + dot : dot;
    }
  }
}

// c[m x n] += a[k x m]^T * b[k x n]. Row p of a starts at a + p * lda.
template <typename T>
void GemmTransAAccumulate(const T* a, int lda, const T* b, T* c, int k, int m,
                          int n) {
  for (int p = 0; p < k; ++p) {
    const T* ap = a + static_cast<size_t>(p) * lda;
    const T* bp = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T v = ap[i];
      if (v == T(0)) continue;
      T* ci = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += v * bp[j];
    }
  }
}

template <typename T>
inline T Sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void AddBiasRows(T* x, const T* bias, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    T* xr = x + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) xr[c] += bias[c];
  }
}

template <typename T>
void LogSoftmaxRow(const T* x, T* y, int n) {
  T mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  T s = 0;
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  const T lse = mx + std::log(s);
  for (int i = 0; i < n; ++i) y[i] = x[i] - lse;
}

// y = (x - mean) / sqrt(var + eps) * gamma + beta, biased variance.
// Writes the normalized input to xhat and 1/sqrt(var+eps) to rstd when
// they are non-null.
template <typename T>
void LayerNormRow(const T* x, const T* gamma, const T* beta, T eps, int n,
                  T* y, T* xhat, T* rstd) {
  T mean = 0;
  for (int i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<T>(n);
  T var = 0;
  for (int i = 0; i < n; ++i) {
    const T d = x[i] - mean;
    var += d * d;
  }
  var /= static_cast<T>(n);
  const T rs = T(1) / std::sqrt(var + eps);
  for (int i = 0; i < n; ++i) {
    const T h = (x[i] - mean) * rs;
    if (xhat != nullptr) xhat[i] = h;
    y[i] = h * gamma[i] + beta[i];
  }
  if (rstd != nullptr) *rstd = rs;
}

// One LSTM time step. z holds the 4H pre-activations x*W_ih + b for this
// frame and is overwritten with the gate activations (i, f, g, o). h and c
// carry the recurrent state in and out.
template <typename T>
void LstmStep(T* z, const T* w_hh, int hidden, T* h, T* c) {
  const int g4 = 4 * hidden;
  Gemm(h, hidden, w_hh, z, 1, hidden, g4, /*accumulate=*/true);
  for (int j = 0; j < hidden; ++j) {
    const T ig = Sigmoid(z[j]);
    const T fg = Sigmoid(z[hidden + j]);
    const T gg = std::tanh(z[2 * hidden + j]);
    const T og = Sigmoid(z[3 * hidden + j]);
    z[j] = ig;
    z[hidden + j] = fg;
    z[2 * hidden + j] = gg;
    z[3 * hidden + j] = og;
    c[j] = fg * c[j] + ig * gg;
    h[j] = og * std::tanh(c[j]);
  }
}

// Attention output for one query frame over keys/values rows [lo, hi].
// q, k, v rows have width heads * head_dim; probs receives heads * (hi-lo+1)
// attention weights when non-null.
template <typename T>
void AttendRow(const T* q, const T* k, const T* v, int width, int heads,
               int lo, int hi, T* out, T* probs) {
  const int head_dim = width / heads;
  const int span = hi - lo + 1;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  std::vector<T> score(span);
  for (int h = 0; h < heads; ++h) {
    const T* qh = q + h * head_dim;
    T mx = 0;
    for (int j = 0; j < span; ++j) {
      const T* kh = k + static_cast<size_t>(lo + j) * width + h * head_dim;
      T s = 0;
      for (int d = 0; d < head_dim; ++d) s += qh[d] * kh[d];
      score[j] = s * scale;
      mx = j == 0 ? score[j] : std::max(mx, score[j]);
    }
    T z = 0;
    for (int j = 0; j < span; ++j) {
      score[j] = std::exp(score[j] - mx);
      z += score[j];
    }
    T* oh = out + h * head_dim;
    std::fill(oh, oh + head_dim, T(0));
    for (int j = 0; j < span; ++j) {
      const T a = score[j] / z;
      if (probs != nullptr) probs[h * span + j] = a;
      const T* vh = v + static_cast<size_t>(lo + j) * width + h * head_dim;
      for (int d = 0; d < head_dim; ++d) oh[d] += a * vh[d];
    }
  }
}

}  // namespace sasr::kernels

#endif  // SASR_DIFFKERN_KERNELS_H_
