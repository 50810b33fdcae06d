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

#include "doctest.h"
#include "itoflow/formula.hpp"

using namespace itoflow;

namespace {

CoefficientModel constant_model(int d, double beta, double sigma) {
  CoefficientModel m;
  m.dim = d;
  m.noise_dim = d;
  m.drift = [beta, d](double, const double*, double, double* out) {
    for (int c = 0; c < d; ++c) out[c] = beta;
  };
  m.diffusion = [sigma, d](double, const double*, double, double* out) {
    std::fill(out, out + d * d, 0.0);
    for (int c = 0; c < d; ++c) out[c * d + c] = sigma;
  };
  m.bound = (std::abs(beta) + sigma) * std::sqrt(double(d)) + 1e-9;
  m.ellipticity = sigma * sigma;
  return m;
}

}  // namespace

TEST_CASE("second moment identity stays in the bootstrap band") {
  const auto model = constant_model(1, 0.0, 1.0);
  const auto paths =
      simulate_paths(model, {1.0, 50}, 20000, InitialLaw{}, 17);
  const auto f = make_functional("second_moment", 1);
  const auto report = verify_measure_flow(f, paths, model);
  REQUIRE(report.times.size() == 51);
  CHECK(report.within_band(3.0, 1e-12));
  // b = 0, sigma = 1: the diffusion term is exactly t.
  CHECK(report.diffusion_term.back() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.drift_term.back() == 0.0);
}

TEST_CASE("mean squared identity has an exactly zero diffusion term") {
  const auto model = constant_model(1, 0.7, 1.0);
  InitialLaw init;
  init.kind = InitialLaw::Kind::kGaussian;
  init.center = {1.0};
  init.scale = {1.0};
  const auto paths = simulate_paths(model, {1.0, 50}, 20000, init, 19);
  const auto f = make_functional("mean_squared", 1);
  const auto report = verify_measure_flow(f, paths, model);
  CHECK(report.within_band(3.0, 1e-12));
  for (double v : report.diffusion_term) CHECK(v == 0.0);
  // lhs(T) tracks (1 + 0.7 T)^2 - 1 loosely at this scale.
  CHECK(report.lhs.back() ==
        doctest::Approx(1.7 * 1.7 - 1.0).epsilon(0.05));
}

TEST_CASE("time-linear identity is exact for g(t, x) = t") {
  const auto model = constant_model(1, 0.4, 0.8);
  const auto paths =
      simulate_paths(model, {1.0, 40}, 500, InitialLaw{}, 23);
  const auto g = make_time_field("t", 1);
  const auto report = verify_time_linear(g, paths, model);
  for (std::size_t i = 0; i < report.times.size(); ++i) {
    CHECK(std::abs(report.residual[i]) <= 1e-12);
    CHECK(report.time_term[i] == doctest::Approx(report.times[i]).epsilon(1e-12));
  }
}

TEST_CASE("generic evaluation agrees with the statistic fast path") {
  const auto model = constant_model(1, 0.2, 1.0);
  const auto paths =
      simulate_paths(model, {1.0, 40}, 400, InitialLaw{}, 43);
  auto fast = make_functional("quadratic:g=gauss", 1);
  auto slow = fast;
  slow.linear_stat.reset();
  slow.pair_stat.reset();
  const auto a = verify_measure_flow(fast, paths, model, {20, 20});
  const auto b = verify_measure_flow(slow, paths, model, {20, 20});
  REQUIRE(a.times.size() == b.times.size());
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    CHECK(a.lhs[i] == doctest::Approx(b.lhs[i]).epsilon(1e-10));
    CHECK(a.drift_term[i] == doctest::Approx(b.drift_term[i]).epsilon(1e-10));
    CHECK(a.diffusion_term[i] ==
          doctest::Approx(b.diffusion_term[i]).epsilon(1e-10));
  }
  CHECK(a.within_band(3.0, 1e-12));
}

TEST_CASE("verification reports are deterministic and thread invariant") {
  const auto model = constant_model(2, 0.1, 0.9);
  const auto paths =
      simulate_paths(model, {1.0, 25}, 4000, InitialLaw{}, 31);
  const auto f = make_functional("second_moment", 2);
  const auto a = verify_measure_flow(f, paths, model, {100, 100}, 1);
  const auto b = verify_measure_flow(f, paths, model, {100, 100}, 3);
  CHECK(a.residual == b.residual);
  CHECK(a.mc_stderr == b.mc_stderr);
  CHECK(a.lhs == b.lhs);
}

TEST_CASE("extended identity on the bilinear functional") {
  const auto xi_model = constant_model(1, 0.1, 0.5);
  const auto x_model = constant_model(1, 1.0, 1.0);
  InitialLaw xi0;
  xi0.center = {0.5};
  InitialLaw x0;
  x0.center = {0.2};
  const TimeGrid grid{1.0, 25};
  const auto xi = simulate_paths(xi_model, grid, 1000, xi0, 41);
  const auto x = simulate_paths(x_model, grid, 8000, x0, 42);
  const auto f = make_extended_functional("bilinear:g=prod", 1);
  const auto report = verify_extended(f, xi, xi_model, x, x_model);
  CHECK(report.within_band(3.0, 1e-12));
  // Closed form: lhs(T) = (0.5 + 0.1 T)(0.2 + 1.0 T) - 0.5 * 0.2.
  CHECK(report.lhs.back() == doctest::Approx(0.6 * 1.2 - 0.1).epsilon(0.05));
  CHECK(std::abs(report.martingale_mean) <=
        3.0 * report.martingale_mean_se + 1e-12);
  CHECK(report.per_path_residual_sup > 0.0);
}

TEST_CASE("extended identity refuses shared seeds and mismatched grids") {
  const auto model = constant_model(1, 0.0, 1.0);
  const TimeGrid grid{1.0, 10};
  const auto a = simulate_paths(model, grid, 100, InitialLaw{}, 5);
  const auto b = simulate_paths(model, grid, 100, InitialLaw{}, 5);
  const auto f = make_extended_functional("bilinear:g=prod", 1);
  CHECK_THROWS_AS(verify_extended(f, a, model, b, model), IndependenceError);
  const auto c = simulate_paths(model, {1.0, 20}, 100, InitialLaw{}, 6);
  CHECK_THROWS_AS(verify_extended(f, a, model, c, model),
                  std::invalid_argument);
}

TEST_CASE("stats and generic extended paths agree") {
  const auto xi_model = constant_model(1, 0.05, 0.5);
  const auto x_model = constant_model(1, 0.8, 1.0);
  const TimeGrid grid{1.0, 15};
  const auto xi = simulate_paths(xi_model, grid, 400, InitialLaw{}, 51);
  const auto x = simulate_paths(x_model, grid, 2000, InitialLaw{}, 52);
  auto fast = make_extended_functional("bilinear:g=prod", 1);
  auto slow = fast;
  slow.stats.reset();
  const auto a = verify_extended(fast, xi, xi_model, x, x_model, {40, 40});
  const auto b = verify_extended(slow, xi, xi_model, x, x_model, {40, 40});
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    CHECK(a.lhs[i] == doctest::Approx(b.lhs[i]).epsilon(1e-9));
    CHECK(a.residual[i] == doctest::Approx(b.residual[i]).epsilon(1e-7));
  }
  CHECK(a.per_path_residual_sup ==
        doctest::Approx(b.per_path_residual_sup).epsilon(1e-9));
}

TEST_CASE("convergence study validates its grids") {
  const auto model = constant_model(1, 0.0, 1.0);
  const auto f = make_functional("second_moment", 1);
  CHECK_THROWS_AS(convergence_study(f, model, InitialLaw{}, 1.0, {20, 10},
                                    {100, 200}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(convergence_study(f, model, InitialLaw{}, 1.0, {10, 20},
                                    {200, 100}, 1),
                  std::invalid_argument);
  const auto table = convergence_study(f, model, InitialLaw{}, 1.0, {10, 20},
                                       {200, 800}, 3, 2);
  REQUIRE(table.max_residual.size() == 2);
  REQUIRE(table.max_residual[0].size() == 2);
  for (const auto& row : table.max_residual) {
    for (double v : row) CHECK(v > 0.0);
  }
}

TEST_CASE("fit_slope recovers an exact line") {
  CHECK(fit_slope({1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}) ==
        doctest::Approx(2.0).epsilon(1e-12));
}
