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

#include <cstdint>
#include <vector>

#include "itoflow/common.hpp"

namespace itoflow {

/// Weighted particle cloud in R^d. Weights are nonnegative and sum to one
/// (tolerance 1e-12); the second moment is finite by construction.
struct EmpiricalMeasure {
  int dim = 1;
  std::vector<double> points;   // N * dim, row-major
  std::vector<double> weights;  // N

  std::size_t size() const { return weights.size(); }
  const double* point(std::size_t j) const { return points.data() + j * dim; }

  static EmpiricalMeasure uniform(int dim, std::vector<double> pts);
  static EmpiricalMeasure point_mass(std::vector<double> x);

  void validate() const;
  double second_moment() const;
  // Weighted mean of each coordinate, written to out (dim).
  void mean(double* out) const;
};

/// Smooth bump supported in the closed ball of radius 1/n:
/// rho_n(x) = n^d c_d exp(-1 / (1 - |nx|^2)) for |nx| < 1, zero outside.
/// Even by construction; the constant c_d is fixed by quadrature so that the
/// profile integrates to one.
struct Mollifier {
  int index_n = 1;
  int dim = 1;
  double norm_const = 0.0;  // c_d above

  double radius() const { return 1.0 / index_n; }
  double density(const double* x) const;

  // Deterministic quadrature nodes of rho_n (offsets from the origin) with
  // weights normalized to sum to one. nodes_per_dim Gauss-Legendre points
  // per axis, tensorized and restricted to the support ball. The node set is
  // symmetric under x -> -x.
  void quadrature_nodes(int nodes_per_dim, std::vector<double>* nodes,
                        std::vector<double>* weights) const;

  // One draw from rho_n by rejection from the uniform law on the support
  // ball; deterministic in (seed, stream, step).
  void sample(std::uint64_t seed, std::uint64_t stream, std::uint64_t step,
              double* out) const;
};

Mollifier mollifier_make(int n, int dim);

/// mu * rho_n: the base cloud smeared by a mollifier. Carries the analytic
/// density x -> sum_j w_j rho_n(x - x_j).
struct MollifiedMeasure {
  EmpiricalMeasure base;
  Mollifier mollifier;

  double density(const double* x) const;
  // Each atom replaced by the mollifier's quadrature nodes.
  EmpiricalMeasure node_expansion(int nodes_per_dim = 16) const;
  // Atom j drawn by weight, then a rho_n perturbation added.
  EmpiricalMeasure sample(std::size_t n_draws, std::uint64_t seed) const;
};

MollifiedMeasure mollify(const EmpiricalMeasure& mu, const Mollifier& rho);

/// Exact 2-Wasserstein distance between finite weighted clouds.
/// d = 1 uses the sorted quantile coupling; equal-size uniform-weight clouds
/// in d >= 2 use an exact assignment solve; the general case uses exact
/// min-cost-flow transport. Sizes above the caps raise CapacityError.
struct WassersteinCaps {
  std::size_t one_dim = 100'000;
  std::size_t assignment = 512;
  std::size_t transport_nodes = 4096;     // N + M
  std::size_t transport_arcs = 2'000'000; // N * M
};

double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                    const WassersteinCaps& caps = {});

/// Finite convolution mu * m: all pairwise atom sums with product weights.
/// Capped at 1e6 atoms.
EmpiricalMeasure convolve_empirical(const EmpiricalMeasure& mu,
                                    const EmpiricalMeasure& m,
                                    std::size_t atom_cap = 1'000'000);

/// L^q norm of the mollified density by deterministic adaptive quadrature
/// over the support (union of atom balls). Relative tolerance 1e-6.
double density_norm(const MollifiedMeasure& m, double q);

/// d_k distance: L^{k'} norm of the density difference, 1/k + 1/k' = 1.
/// Requires k >= d + 1.
double dk_distance(const MollifiedMeasure& mu, const MollifiedMeasure& nu,
                   double k);

}  // namespace itoflow
