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

#include <functional>
#include <vector>

namespace itoflow::quad {

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the Legendre
/// recurrence; deterministic).
void gauss_legendre(int n, std::vector<double>* nodes,
                    std::vector<double>* weights);

/// Same rule mapped to [a, b].
void gauss_legendre_ab(int n, double a, double b, std::vector<double>* nodes,
                       std::vector<double>* weights);

/// Integral of f over [a, b] by composite Gauss-Legendre with uniform
/// refinement until the relative change is below rel_tol. Throws
/// NumericError if the refinement cap is hit first.
double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    double rel_tol = 1e-9, int points_per_cell = 8,
                    int max_refine = 14);

/// Integral of f over the axis-aligned box [lo, hi] in R^dim, composite
/// tensor Gauss-Legendre with uniform refinement until the relative change
/// is below rel_tol.
double integrate_box(const std::function<double(const double*)>& f, int dim,
                     const std::vector<double>& lo,
                     const std::vector<double>& hi, double rel_tol = 1e-7,
                     int points_per_cell = 8, int max_refine = 8);

}  // namespace itoflow::quad
