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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "itoflow/diagnostics.hpp"
#include "itoflow/quadrature.hpp"
#include "itoflow/rng.hpp"

using namespace itoflow;

namespace {

EmpiricalMeasure random_cloud(int dim, std::size_t n, std::uint64_t stream) {
  EmpiricalMeasure mu;
  mu.dim = dim;
  mu.points.resize(n * dim);
  mu.weights.assign(n, 1.0 / n);
  for (std::size_t j = 0; j < n; ++j) {
    for (int c = 0; c < dim; ++c) {
      mu.points[j * dim + c] =
          2.0 * rng::uniform(88, rng::Channel::kSample, stream, j, c) - 1.0;
    }
  }
  return mu;
}

CoefficientModel gaussian_flow(int d) {
  CoefficientModel m;
  m.dim = d;
  m.noise_dim = d;
  m.drift = [d](double, const double*, double, double* out) {
    for (int c = 0; c < d; ++c) out[c] = 0.0;
  };
  m.diffusion = [d](double, const double*, double, double* out) {
    std::fill(out, out + d * d, 0.0);
    for (int c = 0; c < d; ++c) out[c * d + c] = 1.0;
  };
  m.bound = std::sqrt(double(d)) + 1e-9;
  m.ellipticity = 1.0;
  return m;
}

}  // namespace

TEST_CASE("Gaussian L^q norm: closed form equals quadrature") {
  for (int d : {1, 2}) {
    for (double s : {0.25, 1.0}) {
      GaussianDensity p{d, s, {}};
      for (double q : {1.5, 2.0, 4.0}) {
        CHECK(p.lq_norm(q) ==
              doctest::Approx(p.lq_norm_quadrature(q)).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("density integrability lemma: slope and integral") {
  const auto report = density_integrability_check(2.0, 1, 1.0);
  CHECK(report.pass);
  CHECK(report.integrand_power == doctest::Approx(-0.5));
  CHECK(std::abs(report.slope + 0.5) <= 0.02);
  CHECK(report.integral_value ==
        doctest::Approx(report.integral_closed_form).epsilon(1e-6));
  CHECK_THROWS_AS(density_integrability_check(1.5, 1, 1.0),
                  std::invalid_argument);
}

TEST_CASE("joint integrability lemma and its negative case") {
  const auto report = joint_integrability_check(4.0, 1.0, 1, 1.0);
  CHECK(report.pass);
  CHECK(report.integrand_power == doctest::Approx(-0.25));
  // (k, alpha) = (2, 3) in d = 1 violates k >= d(alpha + 1): power is -1.
  CHECK(gaussian_joint_power(2.0, 3.0, 1) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(joint_integrability_check(2.0, 3.0, 1, 1.0),
                  std::invalid_argument);
}

TEST_CASE("convolution contracts W2, exactly for point masses") {
  const auto mu = random_cloud(2, 6, 1);
  const auto nu = random_cloud(2, 8, 2);
  const auto m = random_cloud(2, 4, 3);
  const auto report = contraction_check(mu, nu, m);
  CHECK(report.pass);
  const auto delta = EmpiricalMeasure::point_mass({0.3, -0.1});
  const auto shift = contraction_check(mu, nu, delta);
  CHECK(shift.pass);
  CHECK(std::abs(shift.samples[0].first - shift.samples[0].second) <= 1e-9);
}

TEST_CASE("mollifier convergence check enforces the 1/n bound") {
  const auto mu = random_cloud(1, 5, 4);
  const auto values = mollify_convergence_check(mu, {2, 4, 8}, 12);
  REQUIRE(values.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(values[i] <= 1.0 / (2 << i) + 1e-12);
  }
  CHECK_THROWS_AS(mollify_convergence_check(mu, {4, 2}, 12),
                  std::invalid_argument);
}

TEST_CASE("Krylov test family norms match hand calculations") {
  const double T = 1.0;
  const auto family = krylov_test_family(T);
  REQUIRE(family.size() == 5);
  CHECK(family[0].lp_norm(2.0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(family[1].lp_norm(2.0) ==
        doctest::Approx(std::sqrt(std::sqrt(std::numbers::pi / 2.0))));
  CHECK(family[2].lp_norm(2.0) == doctest::Approx(10.0 * std::sqrt(2.0)));
  CHECK(family[3].lp_norm(2.0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(family[4].lp_norm(2.0) == doctest::Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("Krylov bound holds for the Gaussian flow at desk scale") {
  const auto model = gaussian_flow(1);
  const auto paths =
      simulate_paths(model, {1.0, 100}, 20000, InitialLaw{}, 71);
  const auto report =
      krylov_check(paths, model, krylov_test_family(1.0), 1.0);
  CHECK(report.pass);
  REQUIRE(report.samples.size() == 5);
  CHECK(report.max_ratio < 10.0);
  // Indicator of the unit ball: lhs has the Gaussian CDF closed form.
  const double oracle = quad::integrate_1d(
      [](double s) { return std::erf(1.0 / std::sqrt(2.0 * s)); }, 1e-12, 1.0,
      1e-9);
  CHECK(std::abs(report.samples[0].first - oracle) <=
        4.0 * report.lhs_se[0] + 5e-3);
  CHECK_THROWS_AS(krylov_check(paths, model, krylov_test_family(1.0), 0.5),
                  std::invalid_argument);
}

TEST_CASE("Young's inequality on gridded convolutions") {
  GriddedField f{-3.0, 0.05, {}};
  GriddedField g{-1.0, 0.05, {}};
  for (int i = 0; i <= 120; ++i) {
    const double x = f.origin + i * f.spacing;
    f.values.push_back(std::exp(-x * x) * (1.0 + 0.3 * std::sin(3.0 * x)));
  }
  for (int i = 0; i <= 40; ++i) {
    const double x = g.origin + i * g.spacing;
    g.values.push_back(std::max(0.0, 1.0 - std::abs(x)));
  }
  for (double p : {1.0, 2.0, 3.0}) {
    CHECK(lp_convolution_check(f, g, p).pass);
  }
  GriddedField bad = g;
  bad.spacing = 0.04;
  CHECK_THROWS_AS(lp_convolution_check(f, bad, 2.0), std::invalid_argument);
}
