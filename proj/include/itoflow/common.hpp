/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace itoflow {

/// Raised when an evaluation produced a non-finite value or a quadrature
/// failed to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a problem size exceeds a configured exact-solver cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when two ensembles that must be independent share a seed.
class IndependenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pairwise summation, deterministic for a fixed input order.
inline double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

inline std::size_t num_blocks(std::size_t n, std::size_t block_size) {
  return (n + block_size - 1) / block_size;
}

// Runs fn(block_index, begin, end) over [0, n) split into fixed-size blocks.
// Block boundaries depend only on (n, block_size), never on the thread
// count, so reductions keyed by block index are reproducible.
inline void parallel_for_blocks(
    std::size_t n, std::size_t block_size,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
    int n_threads = 1) {
  const std::size_t nb = num_blocks(n, block_size);
  if (n_threads <= 1 || nb <= 1) {
    for (std::size_t b = 0; b < nb; ++b) {
      fn(b, b * block_size, std::min(n, (b + 1) * block_size));
    }
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t t = std::min<std::size_t>(n_threads, nb);
  for (std::size_t w = 0; w < t; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t b = w; b < nb; b += t) {
        fn(b, b * block_size, std::min(n, (b + 1) * block_size));
      }
    });
  }
  for (auto& th : workers) th.join();
}

inline double dot(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const double* a, int d) { return dot(a, a, d); }

// a (d x m, row-major) times b (m), written to out (d).
inline void mat_vec(const double* a, const double* b, int d, int m,
                    double* out) {
  for (int i = 0; i < d; ++i) out[i] = dot(a + i * m, b, m);
}

// Frobenius inner product of two d x d matrices.
inline double mat_dot(const double* a, const double* b, int d) {
  return dot(a, b, d * d);
}

// out = sigma sigma^T for sigma in R^{d x d1}, row-major, out is d x d.
inline void gram(const double* sigma, int d, int d1, double* out) {
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      out[i * d + j] = dot(sigma + i * d1, sigma + j * d1, d1);
    }
  }
}

}  // namespace itoflow
