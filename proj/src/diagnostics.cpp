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
#include "itoflow/diagnostics.hpp"

#include <cmath>
#include <numbers>

#include "itoflow/formula.hpp"
#include "itoflow/quadrature.hpp"

namespace itoflow {

double GaussianDensity::density(const double* x) const {
  double r2 = 0.0;
  for (int c = 0; c < dim; ++c) {
    const double diff =
        x[c] - (c < static_cast<int>(center.size()) ? center[c] : 0.0);
    r2 += diff * diff;
  }
  return std::pow(2.0 * std::numbers::pi * time_s, -0.5 * dim) *
         std::exp(-r2 / (2.0 * time_s));
}

double GaussianDensity::lq_norm(double q) const {
  if (!(q >= 1.0)) throw std::invalid_argument("lq_norm: q must be >= 1");
  const double two_pi_s = 2.0 * std::numbers::pi * time_s;
  return std::pow(two_pi_s, -0.5 * dim * (q - 1.0) / q) *
         std::pow(q, -0.5 * dim / q);
}

double GaussianDensity::lq_norm_quadrature(double q) const {
  const double half_width = 10.0 * std::sqrt(time_s);
  std::vector<double> lo(dim), hi(dim);
  for (int c = 0; c < dim; ++c) {
    const double cc = c < static_cast<int>(center.size()) ? center[c] : 0.0;
    lo[c] = cc - half_width;
    hi[c] = cc + half_width;
  }
  const double integral = quad::integrate_box(
      [this, q](const double* x) { return std::pow(density(x), q); }, dim, lo,
      hi, 1e-9, 10, 10);
  return std::pow(integral, 1.0 / q);
}

std::vector<TimeSpaceField> krylov_test_family(double horizon) {
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("krylov_test_family: T must be > 0");
  }
  const double T = horizon;
  std::vector<TimeSpaceField> family;
  family.push_back(
      {"indicator_ball1",
       [](double, const double* x) { return std::abs(x[0]) <= 1.0 ? 1.0 : 0.0; },
       [T](double p) { return std::pow(2.0 * T, 1.0 / p); }});
  family.push_back(
      {"gauss_bump",
       [](double, const double* x) { return std::exp(-x[0] * x[0]); },
       [T](double p) {
         return std::pow(T * std::sqrt(std::numbers::pi / p), 1.0 / p);
       }});
  family.push_back(
      {"indicator_ball1_x10",
       [](double, const double* x) {
         return std::abs(x[0]) <= 1.0 ? 10.0 : 0.0;
       },
       [T](double p) { return 10.0 * std::pow(2.0 * T, 1.0 / p); }});
  family.push_back(
      {"indicator_halftime_ball2",
       [T](double t, const double* x) {
         return (t <= 0.5 * T && std::abs(x[0]) <= 2.0) ? 1.0 : 0.0;
       },
       [T](double p) { return std::pow(2.0 * T, 1.0 / p); }});
  family.push_back(
      {"cusp_ball1",
       [](double, const double* x) {
         return std::abs(x[0]) <= 1.0 ? std::abs(x[0]) : 0.0;
       },
       [T](double p) { return std::pow(2.0 * T / (p + 1.0), 1.0 / p); }});
  return family;
}

InequalityReport krylov_check(const PathBundle& paths,
                              const CoefficientModel& model,
                              const std::vector<TimeSpaceField>& f_family,
                              double p_exp) {
  if (f_family.empty()) {
    throw std::invalid_argument("krylov_check: empty test family");
  }
  if (!(p_exp >= paths.dim)) {
    throw std::invalid_argument("krylov_check: p must be >= d");
  }
  model.validate();
  const std::size_t n = paths.n_paths;
  const int n_steps = paths.grid.n_steps;
  const double dt = paths.grid.dt();
  InequalityReport report;
  report.name = "krylov";
  double max_ratio = 0.0;
  for (const auto& f : f_family) {
    const double rhs = f.lp_norm(p_exp + 1.0);
    if (rhs == 0.0) {
      report.notes += f.name + ": zero norm, skipped; ";
      continue;
    }
    // Per-path time integral, then the ensemble mean and its SE.
    std::vector<double> per_path(n);
    for (std::size_t p = 0; p < n; ++p) {
      std::vector<double> steps(n_steps);
      for (int i = 0; i < n_steps; ++i) {
        steps[i] = std::abs(f.value(paths.grid.time(i), paths.state(i, p)));
      }
      per_path[p] = dt * pairwise_sum(steps);
    }
    const double lhs = pairwise_sum(per_path) / n;
    double var = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      var += (per_path[p] - lhs) * (per_path[p] - lhs);
    }
    const double se = n > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    report.samples.emplace_back(lhs, rhs);
    report.lhs_se.push_back(se);
    max_ratio = std::max(max_ratio, lhs / rhs);
  }
  report.max_ratio = max_ratio;
  report.pass = std::isfinite(max_ratio) && !report.samples.empty();
  return report;
}

namespace {

// Quadrature of C * s^e over [0, T] with the s = w^m substitution,
// m = 2 / (e + 1), which turns the integrand into m C w and removes the
// endpoint singularity for any e > -1.
double power_integral_quadrature(double c, double e, double horizon) {
  const double m = 2.0 / (e + 1.0);
  return quad::integrate_1d(
      [c, e, m](double w) {
        return m * c * std::pow(w, m * (e + 1.0) - 1.0);
      },
      0.0, std::pow(horizon, 1.0 / m), 1e-10);
}

}  // namespace

InequalityReport density_integrability_check(double k, int d, double horizon) {
  if (!(k >= d + 1)) {
    throw std::invalid_argument(
        "density_integrability_check: requires k >= d + 1");
  }
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("density_integrability_check: T must be > 0");
  }
  const double kp = k / (k - 1.0);
  InequalityReport report;
  report.name = "density_integrability";
  // ||p(s,.)||_{k'} = A s^{-d/(2k)}; the L^{k/d} integrand is A^{k/d} s^{-1/2}.
  const double a_const = std::pow(2.0 * std::numbers::pi, -0.5 * d / k) *
                         std::pow(kp, -0.5 * d / kp);
  const double power = -0.5;
  report.integrand_power = power;
  const double c_const = std::pow(a_const, k / d);
  report.integral_closed_form =
      c_const * std::pow(horizon, power + 1.0) / (power + 1.0);
  report.integral_value = power_integral_quadrature(c_const, power, horizon);

  // Log-log regression of quadrature-evaluated norms at s = 2^-1 .. 2^-6.
  std::vector<double> lx, ly;
  for (int j = 1; j <= 6; ++j) {
    GaussianDensity p{d, std::pow(2.0, -j), {}};
    const double norm = p.lq_norm_quadrature(kp);
    report.samples.emplace_back(std::pow(norm, k / d),
                                c_const * std::pow(p.time_s, power));
    lx.push_back(std::log(p.time_s));
    ly.push_back(std::log(std::pow(norm, k / d)));
  }
  report.slope = fit_slope(lx, ly);
  report.slope_expected = power;
  double max_ratio = 0.0;
  for (const auto& [lhs, rhs] : report.samples) {
    max_ratio = std::max(max_ratio, lhs / rhs);
  }
  report.max_ratio = max_ratio;
  report.pass =
      power > -1.0 &&
      std::abs(report.slope - power) <= 0.02 &&
      std::abs(report.integral_value - report.integral_closed_form) <=
          1e-6 * report.integral_closed_form;
  return report;
}

double gaussian_joint_power(double k, double alpha, int d) {
  return -(alpha + 1.0) * d / (2.0 * k);
}

InequalityReport joint_integrability_check(double k, double alpha, int d,
                                           double horizon) {
  if (!(k >= std::max(static_cast<double>(d) + 1.0, d * (alpha + 1.0)))) {
    throw std::invalid_argument(
        "joint_integrability_check: requires k >= max(d+1, d(alpha+1))");
  }
  const double kp = k / (k - 1.0);
  InequalityReport report;
  report.name = "joint_integrability";
  const double a_const = std::pow(2.0 * std::numbers::pi, -0.5 * d / k) *
                         std::pow(kp, -0.5 * d / kp);
  const double power = gaussian_joint_power(k, alpha, d);
  report.integrand_power = power;
  const double c_const = std::pow(a_const, alpha + 1.0);
  report.integral_closed_form =
      c_const * std::pow(horizon, power + 1.0) / (power + 1.0);
  report.integral_value = power_integral_quadrature(c_const, power, horizon);
  // Spot check the integrand against quadrature-evaluated norms.
  double max_ratio = 0.0;
  for (int j = 1; j <= 3; ++j) {
    GaussianDensity p{d, std::pow(2.0, -j), {}};
    const double norm = p.lq_norm_quadrature(kp);
    const double lhs = std::pow(norm, alpha) * norm;
    const double rhs = c_const * std::pow(p.time_s, power);
    report.samples.emplace_back(lhs, rhs);
    max_ratio = std::max(max_ratio, lhs / rhs);
  }
  report.max_ratio = max_ratio;
  report.pass =
      power > -1.0 &&
      std::abs(report.integral_value - report.integral_closed_form) <=
          1e-6 * report.integral_closed_form &&
      std::abs(max_ratio - 1.0) <= 1e-5;
  return report;
}

InequalityReport contraction_check(const EmpiricalMeasure& mu,
                                   const EmpiricalMeasure& nu,
                                   const EmpiricalMeasure& m) {
  InequalityReport report;
  report.name = "contraction";
  const double lhs =
      wasserstein2(convolve_empirical(mu, m), convolve_empirical(nu, m));
  const double rhs = wasserstein2(mu, nu);
  report.samples.emplace_back(lhs, rhs);
  report.max_ratio = rhs > 0.0 ? lhs / rhs : (lhs == 0.0 ? 1.0 : HUGE_VAL);
  report.pass = lhs <= rhs + 1e-9;
  return report;
}

std::vector<double> mollify_convergence_check(const EmpiricalMeasure& mu,
                                              const std::vector<int>& n_list,
                                              int nodes_per_dim) {
  for (std::size_t i = 1; i < n_list.size(); ++i) {
    if (n_list[i] <= n_list[i - 1]) {
      throw std::invalid_argument(
          "mollify_convergence_check: n_list must increase");
    }
  }
  std::vector<double> values;
  values.reserve(n_list.size());
  for (int n : n_list) {
    const Mollifier rho = mollifier_make(n, mu.dim);
    const EmpiricalMeasure smeared =
        MollifiedMeasure{mu, rho}.node_expansion(nodes_per_dim);
    const double w2 = wasserstein2(smeared, mu);
    if (w2 > 1.0 / n + 1e-12) {
      throw NumericError(
          "mollify_convergence_check: coupling bound violated at n=" +
          std::to_string(n));
    }
    values.push_back(w2);
  }
  return values;
}

InequalityReport lp_convolution_check(const GriddedField& f,
                                      const GriddedField& g, double p_exp) {
  if (!(p_exp >= 1.0)) {
    throw std::invalid_argument("lp_convolution_check: p must be >= 1");
  }
  if (f.values.empty() || g.values.empty()) {
    throw std::invalid_argument("lp_convolution_check: empty field");
  }
  if (std::abs(f.spacing - g.spacing) > 1e-15 * std::abs(f.spacing)) {
    throw std::invalid_argument("lp_convolution_check: grid spacing mismatch");
  }
  const double h = f.spacing;
  const std::size_t nf = f.values.size(), ng = g.values.size();
  std::vector<double> conv(nf + ng - 1, 0.0);
  for (std::size_t i = 0; i < nf; ++i) {
    for (std::size_t j = 0; j < ng; ++j) {
      conv[i + j] += f.values[i] * g.values[j] * h;
    }
  }
  auto lp = [h](const std::vector<double>& v, double p) {
    std::vector<double> terms(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      terms[i] = std::pow(std::abs(v[i]), p) * h;
    }
    return std::pow(pairwise_sum(terms), 1.0 / p);
  };
  const double lhs = lp(conv, p_exp);
  const double rhs = lp(f.values, p_exp) * lp(g.values, 1.0);
  InequalityReport report;
  report.name = "lp_convolution";
  report.samples.emplace_back(lhs, rhs);
  report.max_ratio = rhs > 0.0 ? lhs / rhs : (lhs == 0.0 ? 1.0 : HUGE_VAL);
  report.pass = lhs <= rhs * (1.0 + 1e-6);
  return report;
}

}  // namespace itoflow
