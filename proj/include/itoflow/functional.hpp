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
#include <memory>
#include <optional>
#include <string>

#include "itoflow/measure.hpp"

namespace itoflow {

/// Scalar field on R^d with closed-form gradient and Hessian.
struct ScalarField {
  int dim = 1;
  std::function<double(const double*)> value;
  std::function<void(const double*, double*)> grad;  // d
  std::function<void(const double*, double*)> hess;  // d x d, row-major
};

/// Kernel g(x, y) on R^d x R^d with derivatives in each slot.
struct ScalarField2 {
  int dim = 1;
  std::function<double(const double*, const double*)> value;
  std::function<void(const double*, const double*, double*)> grad_x;
  std::function<void(const double*, const double*, double*)> grad_y;
  std::function<void(const double*, const double*, double*)> hess_x;
  std::function<void(const double*, const double*, double*)> hess_y;
};

/// g(t, x) with the derivatives the time-linear identity needs.
struct TimeField {
  int dim = 1;
  std::function<double(double, const double*)> value;
  std::function<double(double, const double*)> dt;
  std::function<void(double, const double*, double*)> grad_x;
  std::function<void(double, const double*, double*)> hess_x;
};

/// Outer map F(x, y) with x in R^d and scalar y, for composite functionals.
struct CompositeOuter {
  int dim = 1;
  std::function<double(const double*, double)> value;
  std::function<void(const double*, double, double*)> grad_x;
  std::function<void(const double*, double, double*)> hess_x;
  std::function<double(const double*, double)> dy;
};

/// The linear functional derivative of u at a fixed measure, as a function
/// of the free variable v together with its v-derivatives.
class LinDerivative {
 public:
  virtual ~LinDerivative() = default;
  virtual double value(const double* v) const = 0;
  virtual void grad(const double* v, double* out) const = 0;  // d
  virtual void hess(const double* v, double* out) const = 0;  // d x d
};

struct FunctionalMeta {
  double sobolev_k = 0.0;  // integrability index k of the derivative
  double alpha = 0.0;      // growth exponent in the norm bound
  std::string distance = "W2";  // "W2" or "dk"
  bool hypothesis_certified = true;
  int measure_degree = 1;  // polynomial degree of u in the measure
};

// Sufficient-statistic form u(mu) = phi(int s dmu) with the per-path
// reductions each identity term needs. Lets verification and bootstrap run
// on block sums instead of re-evaluating the functional per resample.
struct LinearStatForm {
  int stat_dim = 1;
  std::function<void(const double* x, double* out)> s;
  // Components grad s_a(x) . b.
  std::function<void(const double* x, const double* b, double* out)> s_drift;
  // Components 0.5 * (hess s_a(x) : a).
  std::function<void(const double* x, const double* a, double* out)> s_diffusion;
  std::function<double(const double* theta)> phi;
  std::function<void(const double* theta, double* out)> dphi;
};

// Pair form u(mu) = double integral of g; the drift/diffusion kernels carry
// the coefficient evaluated at the first slot.
struct PairStatForm {
  std::function<double(const double* x, const double* y)> g;
  // (grad_x g(x, y) + grad_y g(y, x)) . bx
  std::function<double(const double* x, const double* bx, const double* y)>
      g_drift;
  // 0.5 * (hess_x g(x, y) + hess_y g(y, x)) : ax
  std::function<double(const double* x, const double* ax, const double* y)>
      g_diffusion;
};

/// A functional of probability measures with its linear derivative.
struct MeasureFunctional {
  int dim = 1;
  std::string name;
  FunctionalMeta meta;
  std::function<double(const EmpiricalMeasure&)> value;
  // Derivative bundle at a fixed measure (shared across many v probes).
  std::function<std::shared_ptr<const LinDerivative>(const EmpiricalMeasure&)>
      prepare;
  std::optional<LinearStatForm> linear_stat;
  std::optional<PairStatForm> pair_stat;

  double lin_deriv(const EmpiricalMeasure& mu, const double* v) const {
    return prepare(mu)->value(v);
  }
  void lin_deriv_grad(const EmpiricalMeasure& mu, const double* v,
                      double* out) const {
    prepare(mu)->grad(v, out);
  }
  void lin_deriv_hess(const EmpiricalMeasure& mu, const double* v,
                      double* out) const {
    prepare(mu)->hess(v, out);
  }
};

/// Reductions over the X ensemble plus closed forms in (t, x, theta) for the
/// extended identity. theta_drift/theta_diffusion are ensemble means of
/// s_drift/s_diffusion with the X coefficients.
struct ExtStatsForm {
  int stat_dim = 1;
  std::function<void(const double* y, double* out)> s;
  std::function<void(const double* y, const double* by, double* out)> s_drift;
  std::function<void(const double* y, const double* ay, double* out)>
      s_diffusion;
  std::function<double(double t, const double* x, const double* theta)> value;
  std::function<double(double t, const double* x, const double* theta)> dt;
  std::function<void(double t, const double* x, const double* theta,
                     double* out)>
      grad_x;
  std::function<void(double t, const double* x, const double* theta,
                     double* out)>
      hess_x;
  std::function<double(double t, const double* x, const double* theta,
                       const double* theta_drift)>
      tilde_drift;
  std::function<double(double t, const double* x, const double* theta,
                       const double* theta_diffusion)>
      tilde_diffusion;
};

class ExtLinDerivative {
 public:
  virtual ~ExtLinDerivative() = default;
  virtual double value(const double* v) const = 0;
  virtual void grad(const double* v, double* out) const = 0;
  virtual void hess(const double* v, double* out) const = 0;
};

/// u(t, x, mu) with every derivative channel of the extended identity.
struct ExtendedFunctional {
  int dim = 1;
  std::string name;
  FunctionalMeta meta;  // sobolev_k = k1, alpha = alpha1
  double sobolev_k2 = 0.0;
  double alpha2 = 0.0;
  std::function<double(double, const double*, const EmpiricalMeasure&)> value;
  std::function<double(double, const double*, const EmpiricalMeasure&)>
      time_deriv;
  std::function<void(double, const double*, const EmpiricalMeasure&, double*)>
      space_grad;
  std::function<void(double, const double*, const EmpiricalMeasure&, double*)>
      space_hess;
  std::function<std::shared_ptr<const ExtLinDerivative>(
      double, const double*, const EmpiricalMeasure&)>
      prepare;
  std::optional<ExtStatsForm> stats;
};

MeasureFunctional make_linear(ScalarField g);
MeasureFunctional make_quadratic(ScalarField2 g);
// f must be even: f(x) = f(-x).
MeasureFunctional make_convolution(ScalarField f);
ExtendedFunctional make_composite(CompositeOuter f_outer, ScalarField g);
ExtendedFunctional make_bilinear(ScalarField2 g);

/// u^n(mu) = u(mu * rho_n), with the convolution realized by deterministic
/// node expansion (mc_nodes Gauss-Legendre points per axis). The derivative
/// applies the smoothed-derivative convolution formula on the same node set.
MeasureFunctional mollified(const MeasureFunctional& f, const Mollifier& rho,
                            int mc_nodes);

/// | u(mu) - u(nu) - int_0^1 int dudm(t mu + (1-t) nu)(v) d(mu - nu)(v) dt |
/// with Gauss-Legendre in t and exact space sums.
double check_linear_derivative_identity(const MeasureFunctional& f,
                                        const EmpiricalMeasure& mu,
                                        const EmpiricalMeasure& nu,
                                        int n_quad);

/// Central differences of lin_deriv in v; test oracle only.
void finite_difference_oracle(const MeasureFunctional& f,
                              const EmpiricalMeasure& mu, const double* v,
                              double h, double* grad_out, double* hess_out);

// Named building blocks addressable from configs.
ScalarField make_field(const std::string& id, int dim);
ScalarField2 make_kernel(const std::string& id, int dim);
ScalarField make_even_field(const std::string& id, int dim);
CompositeOuter make_outer(const std::string& id, int dim);
TimeField make_time_field(const std::string& id, int dim);

/// Registry: `second_moment`, `mean_squared`, `quadratic:g=<id>`,
/// `convolution:f=<id>`. Unknown names raise invalid-argument.
MeasureFunctional make_functional(const std::string& name, int dim);

/// Registry: `bilinear:g=<id>`, `composite:F=<id>,g=<id>`.
ExtendedFunctional make_extended_functional(const std::string& name, int dim);

}  // namespace itoflow
