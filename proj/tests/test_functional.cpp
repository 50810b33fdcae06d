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
#include <vector>

#include "doctest.h"
#include "itoflow/functional.hpp"
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
          2.0 * rng::uniform(55, rng::Channel::kSample, stream, j, c) - 1.0;
    }
  }
  return mu;
}

const std::vector<std::string> kRegistry = {
    "second_moment",     "mean_squared",        "linear:g=gauss",
    "quadratic:g=prod",  "quadratic:g=gauss",   "quadratic:g=gauss_diff",
    "convolution:f=gauss_bump", "convolution:f=abs2"};

}  // namespace

TEST_CASE("second moment on a known cloud") {
  const auto mu = EmpiricalMeasure::uniform(1, {1.0, 3.0});
  const auto f = make_functional("second_moment", 1);
  CHECK(f.value(mu) == doctest::Approx(5.0).epsilon(1e-14));
  const double v = 0.7;
  CHECK(f.lin_deriv(mu, &v) == doctest::Approx(0.49).epsilon(1e-14));
}

TEST_CASE("product kernel on {1, 3}: u = 4 and derivative 4v") {
  const auto mu = EmpiricalMeasure::uniform(1, {1.0, 3.0});
  const auto f = make_functional("quadratic:g=prod", 1);
  CHECK(f.value(mu) == doctest::Approx(4.0).epsilon(1e-14));
  for (double v : {-1.0, 0.3, 2.0}) {
    CHECK(f.lin_deriv(mu, &v) == doctest::Approx(4.0 * v).epsilon(1e-13));
  }
  CHECK(make_functional("mean_squared", 1).value(mu) ==
        doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("convolution matches the manual double sum") {
  const auto mu = random_cloud(1, 5, 1);
  const auto f = make_functional("convolution:f=gauss_bump", 1);
  double manual = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double diff = mu.point(i)[0] - mu.point(j)[0];
      manual += mu.weights[i] * mu.weights[j] * std::exp(-diff * diff);
    }
  }
  CHECK(f.value(mu) == doctest::Approx(manual).epsilon(1e-13));
}

TEST_CASE("linear derivative identity holds across the registry") {
  for (const auto& name : kRegistry) {
    for (int pair = 0; pair < 5; ++pair) {
      const auto mu = random_cloud(1, 6, 10 + 2 * pair);
      const auto nu = random_cloud(1, 9, 11 + 2 * pair);
      const auto f = make_functional(name, 1);
      const double residual = check_linear_derivative_identity(f, mu, nu, 8);
      INFO(name);
      CHECK(residual <= 1e-8);
    }
  }
}

TEST_CASE("closed-form derivatives match finite differences") {
  for (const auto& name : kRegistry) {
    const auto f = make_functional(name, 1);
    const auto mu = random_cloud(1, 7, 30);
    const double v = 0.4;
    double g_fd, h_fd, g_cf, h_cf;
    finite_difference_oracle(f, mu, &v, 1e-4, &g_fd, &h_fd);
    f.lin_deriv_grad(mu, &v, &g_cf);
    f.lin_deriv_hess(mu, &v, &h_cf);
    INFO(name);
    CHECK(std::abs(g_fd - g_cf) <= 1e-6);
    CHECK(std::abs(h_fd - h_cf) <= 1e-6);
  }
}

TEST_CASE("identity and derivative survive in two dimensions") {
  const auto f = make_functional("second_moment", 2);
  const auto mu = random_cloud(2, 6, 40);
  const auto nu = random_cloud(2, 5, 41);
  CHECK(check_linear_derivative_identity(f, mu, nu, 8) <= 1e-8);
  const double v[2] = {0.3, -0.5};
  double g_fd[2], h_fd[4], g_cf[2], h_cf[4];
  finite_difference_oracle(f, mu, v, 1e-4, g_fd, h_fd);
  f.lin_deriv_grad(mu, v, g_cf);
  f.lin_deriv_hess(mu, v, h_cf);
  for (int c = 0; c < 2; ++c) CHECK(std::abs(g_fd[c] - g_cf[c]) <= 1e-6);
  for (int c = 0; c < 4; ++c) CHECK(std::abs(h_fd[c] - h_cf[c]) <= 1e-6);
}

TEST_CASE("mollified second moment shifts by a constant") {
  const auto base = make_functional("second_moment", 1);
  const auto mu = random_cloud(1, 6, 50);
  const auto nu = random_cloud(1, 8, 51);
  const auto rho = mollifier_make(4, 1);
  const auto smoothed = mollified(base, rho, 12);
  // u_n(mu) = u(mu) + second moment of rho_n, so differences are preserved.
  const double gap_mu = smoothed.value(mu) - base.value(mu);
  const double gap_nu = smoothed.value(nu) - base.value(nu);
  CHECK(gap_mu == doctest::Approx(gap_nu).epsilon(1e-10));
  CHECK(gap_mu > 0.0);
  CHECK(check_linear_derivative_identity(smoothed, mu, nu, 8) <= 1e-8);
  const double v = -0.2;
  double g_fd, h_fd, g_cf, h_cf;
  finite_difference_oracle(smoothed, mu, &v, 1e-4, &g_fd, &h_fd);
  smoothed.prepare(mu)->grad(&v, &g_cf);
  smoothed.prepare(mu)->hess(&v, &h_cf);
  CHECK(std::abs(g_fd - g_cf) <= 1e-6);
  CHECK(std::abs(h_fd - h_cf) <= 1e-6);
}

TEST_CASE("bilinear channels match their definitions") {
  const auto f = make_extended_functional("bilinear:g=prod", 1);
  const auto mu = random_cloud(1, 6, 60);
  double mean = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    mean += mu.weights[j] * mu.point(j)[0];
  }
  const double x = 1.3;
  CHECK(f.value(0.2, &x, mu) == doctest::Approx(x * mean).epsilon(1e-13));
  CHECK(f.time_deriv(0.2, &x, mu) == doctest::Approx(0.0));
  double grad, hess;
  f.space_grad(0.2, &x, mu, &grad);
  f.space_hess(0.2, &x, mu, &hess);
  CHECK(grad == doctest::Approx(mean).epsilon(1e-13));
  CHECK(hess == doctest::Approx(0.0));
  const double v = 0.4;
  CHECK(f.prepare(0.2, &x, mu)->value(&v) ==
        doctest::Approx(x * v).epsilon(1e-13));
}

TEST_CASE("composite channels match their definitions") {
  const auto f = make_extended_functional("composite:F=square,g=gauss", 1);
  const auto mu = random_cloud(1, 6, 61);
  double theta = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    theta += mu.weights[j] * std::exp(-mu.point(j)[0] * mu.point(j)[0]);
  }
  const double x = 0.5;
  // F = square acts on the integral channel.
  CHECK(f.value(0.1, &x, mu) == doctest::Approx(theta * theta).epsilon(1e-12));
  const double v = -0.3;
  const double expected =
      std::exp(-v * v) * 2.0 * theta;  // g(v) dF/dy at (x, theta)
  CHECK(f.prepare(0.1, &x, mu)->value(&v) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("unknown registry names are rejected") {
  CHECK_THROWS_AS(make_functional("nope", 1), std::invalid_argument);
  CHECK_THROWS_AS(make_functional("quadratic:g=nope", 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_extended_functional("bilinear:g=nope", 1),
                  std::invalid_argument);
}
