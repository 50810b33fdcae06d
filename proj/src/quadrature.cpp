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
#include "itoflow/quadrature.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "itoflow/common.hpp"

namespace itoflow::quad {

void gauss_legendre(int n, std::vector<double>* nodes,
                    std::vector<double>* weights) {
  nodes->assign(n, 0.0);
  weights->assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    (*nodes)[i] = -x;
    (*nodes)[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    (*weights)[i] = w;
    (*weights)[n - 1 - i] = w;
  }
}

void gauss_legendre_ab(int n, double a, double b, std::vector<double>* nodes,
                       std::vector<double>* weights) {
  gauss_legendre(n, nodes, weights);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    (*nodes)[i] = mid + half * (*nodes)[i];
    (*weights)[i] *= half;
  }
}

namespace {

double composite_1d(const std::function<double(double)>& f, double a, double b,
                    int cells, const std::vector<double>& gl_nodes,
                    const std::vector<double>& gl_weights) {
  const double h = (b - a) / cells;
  std::vector<double> partials(cells);
  for (int c = 0; c < cells; ++c) {
    const double lo = a + c * h;
    const double mid = lo + 0.5 * h;
    double s = 0.0;
    for (std::size_t i = 0; i < gl_nodes.size(); ++i) {
      s += gl_weights[i] * f(mid + 0.5 * h * gl_nodes[i]);
    }
    partials[c] = s * 0.5 * h;
  }
  return pairwise_sum(partials);
}

}  // namespace

double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    double rel_tol, int points_per_cell, int max_refine) {
  std::vector<double> gn, gw;
  gauss_legendre(points_per_cell, &gn, &gw);
  double prev = composite_1d(f, a, b, 1, gn, gw);
  for (int k = 1; k <= max_refine; ++k) {
    const double cur = composite_1d(f, a, b, 1 << k, gn, gw);
    const double scale = std::max({std::abs(cur), std::abs(prev), 1e-300});
    if (std::abs(cur - prev) <= rel_tol * scale) return cur;
    prev = cur;
  }
  throw NumericError("integrate_1d: refinement cap reached without convergence");
}

namespace {

double composite_box(const std::function<double(const double*)>& f, int dim,
                     const std::vector<double>& lo,
                     const std::vector<double>& hi, int cells_per_dim,
                     const std::vector<double>& gn,
                     const std::vector<double>& gw) {
  const int q = static_cast<int>(gn.size());
  std::vector<double> h(dim), x(dim);
  for (int c = 0; c < dim; ++c) h[c] = (hi[c] - lo[c]) / cells_per_dim;

  // Iterate all (cell, node) tensor indices.
  std::size_t n_cells = 1, n_nodes = 1;
  for (int c = 0; c < dim; ++c) {
    n_cells *= static_cast<std::size_t>(cells_per_dim);
    n_nodes *= static_cast<std::size_t>(q);
  }
  std::vector<double> partials;
  partials.reserve(n_cells);
  std::vector<int> ci(dim, 0), ni(dim, 0);
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    double cell_sum = 0.0;
    double jac = 1.0;
    for (int c = 0; c < dim; ++c) jac *= 0.5 * h[c];
    std::fill(ni.begin(), ni.end(), 0);
    for (std::size_t node = 0; node < n_nodes; ++node) {
      double w = 1.0;
      for (int c = 0; c < dim; ++c) {
        const double cell_lo = lo[c] + ci[c] * h[c];
        x[c] = cell_lo + 0.5 * h[c] * (1.0 + gn[ni[c]]);
        w *= gw[ni[c]];
      }
      cell_sum += w * f(x.data());
      for (int c = 0; c < dim; ++c) {
        if (++ni[c] < q) break;
        ni[c] = 0;
      }
    }
    partials.push_back(cell_sum * jac);
    for (int c = 0; c < dim; ++c) {
      if (++ci[c] < cells_per_dim) break;
      ci[c] = 0;
    }
  }
  return pairwise_sum(partials);
}

}  // namespace

double integrate_box(const std::function<double(const double*)>& f, int dim,
                     const std::vector<double>& lo,
                     const std::vector<double>& hi, double rel_tol,
                     int points_per_cell, int max_refine) {
  if (dim == 1) {
    return integrate_1d([&f](double t) { return f(&t); }, lo[0], hi[0],
                        rel_tol, points_per_cell, 14);
  }
  std::vector<double> gn, gw;
  gauss_legendre(points_per_cell, &gn, &gw);
  double prev = composite_box(f, dim, lo, hi, 1, gn, gw);
  for (int k = 1; k <= max_refine; ++k) {
    const double cur = composite_box(f, dim, lo, hi, 1 << k, gn, gw);
    const double scale = std::max({std::abs(cur), std::abs(prev), 1e-300});
    if (std::abs(cur - prev) <= rel_tol * scale) return cur;
    prev = cur;
  }
  throw NumericError("integrate_box: refinement cap reached without convergence");
}

}  // namespace itoflow::quad
