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

#include <string>
#include <utility>
#include <vector>

#include "itoflow/process.hpp"

namespace itoflow {

/// Outcome of one inequality or lemma check.
struct InequalityReport {
  std::string name;
  std::vector<std::pair<double, double>> samples;  // (lhs, rhs) pairs
  std::vector<double> lhs_se;  // Monte Carlo SE of each lhs, when sampled
  double max_ratio = 0.0;      // max lhs / rhs over samples with rhs > 0
  bool pass = false;
  std::string notes;

  // Extra channels for the closed-form Gaussian checks.
  double slope = 0.0;
  double slope_expected = 0.0;
  double integrand_power = 0.0;
  double integral_value = 0.0;
  double integral_closed_form = 0.0;
};

/// Gaussian flow density p(s, x) = (2 pi s)^{-d/2} exp(-|x - c|^2 / (2s)),
/// the marginal law of the driftless identity-diffusion process.
struct GaussianDensity {
  int dim = 1;
  double time_s = 1.0;
  std::vector<double> center;  // defaults to the origin

  double density(const double* x) const;
  // Closed form (2 pi s)^{-d(q-1)/(2q)} q^{-d/(2q)}.
  double lq_norm(double q) const;
  // Independent quadrature oracle over a truncated box, rel tol ~1e-8.
  double lq_norm_quadrature(double q) const;
};

/// Test field on [0, T] x R^d with a closed-form space-time L^p norm.
struct TimeSpaceField {
  std::string name;
  std::function<double(double t, const double* x)> value;
  // ||f||_{L^{p}([0,T] x R^d)} as a function of the exponent p.
  std::function<double(double p)> lp_norm;
};

/// Built-in d = 1 test family with closed-form space-time norms: indicators,
/// a Gaussian bump, a scaled indicator, a half-horizon indicator, and a
/// cusp |x| restricted to the unit ball.
std::vector<TimeSpaceField> krylov_test_family(double horizon);

/// E int_0^T |f(s, X_s)| ds <= N ||f||_{L^{p+1}} over a test family; the
/// constant is unknown, so the check records the empirical max ratio.
InequalityReport krylov_check(const PathBundle& paths,
                              const CoefficientModel& model,
                              const std::vector<TimeSpaceField>& f_family,
                              double p_exp);

/// s -> ||p(s,.)||_{L^{k'}} lies in L^{k/d}([0,T]) for the Gaussian flow;
/// verifies the closed-form integrand power by log-log regression and the
/// time integral against its closed form.
InequalityReport density_integrability_check(double k, int d, double horizon);

/// int_0^T ||p||^alpha_{L^{k'}} ||q||_{L^{k'}} ds < infinity when
/// k >= max(d+1, d(alpha+1)); violating exponents raise invalid-argument.
InequalityReport joint_integrability_check(double k, double alpha, int d,
                                           double horizon);

/// Closed-form power of s in the joint integrand; usable for any (k, alpha),
/// including hypothesis-violating pairs (power <= -1 means divergence).
double gaussian_joint_power(double k, double alpha, int d);

/// W2(mu * m, nu * m) <= W2(mu, nu) on exact finite convolutions.
InequalityReport contraction_check(const EmpiricalMeasure& mu,
                                   const EmpiricalMeasure& nu,
                                   const EmpiricalMeasure& m);

/// W2(mu * rho_n, mu) per n; throws NumericError if any value exceeds 1/n.
std::vector<double> mollify_convergence_check(const EmpiricalMeasure& mu,
                                              const std::vector<int>& n_list,
                                              int nodes_per_dim = 12);

/// Compactly supported field sampled on a uniform 1-d grid.
struct GriddedField {
  double origin = 0.0;
  double spacing = 1.0;
  std::vector<double> values;
};

/// Young's inequality ||f*g||_p <= ||f||_p ||g||_1 on discrete convolutions
/// (the measure-contraction instance is the ||g||_1 = 1 case).
InequalityReport lp_convolution_check(const GriddedField& f,
                                      const GriddedField& g, double p_exp);

}  // namespace itoflow
