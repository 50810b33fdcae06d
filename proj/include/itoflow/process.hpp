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
#include <functional>
#include <string>
#include <vector>

#include "itoflow/common.hpp"
#include "itoflow/measure.hpp"
#include "itoflow/rng.hpp"

namespace itoflow {

/// Uniform grid on [0, T]. The last grid point is exactly T.
struct TimeGrid {
  double horizon = 1.0;
  int n_steps = 1;

  double dt() const { return horizon / n_steps; }
  // t_i = i * dt, with t_{n_steps} pinned to T.
  double time(int i) const {
    return i == n_steps ? horizon : i * dt();
  }
  void validate() const;
  bool operator==(const TimeGrid&) const = default;
};

// Drift/diffusion evaluated at (t, x, aux) where aux is one per-(path, step)
// uniform draw, available for coefficient models that carry path-local
// randomness. Output buffers are caller-owned.
using DriftFn = std::function<void(double t, const double* x, double aux,
                                   double* out /* d */)>;
using DiffusionFn = std::function<void(double t, const double* x, double aux,
                                       double* out /* d x d1, row-major */)>;

struct CoefficientModel {
  int dim = 1;
  int noise_dim = 1;  // >= dim
  DriftFn drift;
  DiffusionFn diffusion;
  double bound = 1.0;        // declared K: |b| + |sigma| <= K
  double ellipticity = 1.0;  // declared delta: (sigma sigma^T) l . l >= delta |l|^2
  void validate() const;
};

/// Initial-law samplers: point mass, Gaussian (diagonal), uniform on a ball.
struct InitialLaw {
  enum class Kind { kPoint, kGaussian, kUniformBall };
  Kind kind = Kind::kPoint;
  std::vector<double> center;  // size d (defaults to 0)
  std::vector<double> scale;   // per-coordinate std dev, or {radius} for ball

  void sample(std::uint64_t seed, std::uint64_t path, int dim,
              double* out) const;
};

/// Discretized trajectories of n_paths independent copies of the process.
/// States are stored time-major: state(i, p) is contiguous over p for fixed i.
/// Immutable after construction; safe for concurrent reads.
struct PathBundle {
  TimeGrid grid;
  int dim = 1;
  int noise_dim = 1;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  std::string rng_scheme;
  std::vector<double> states;  // (n_steps+1) * n_paths * dim

  // Coefficient caches at the left endpoint of each step. Populated only
  // when the footprint is below kCacheCap; otherwise values are recomputed
  // on demand (coefficients are pure functions of (t, x, aux), so the two
  // routes agree bit for bit).
  bool cached = false;
  std::vector<double> drift_cache;      // n_steps * n_paths * dim
  std::vector<double> diffusion_cache;  // n_steps * n_paths * dim * noise_dim

  static constexpr std::size_t kCacheCap = 30'000'000;  // doubles

  const double* state(int t_index, std::size_t path) const {
    return states.data() +
           (static_cast<std::size_t>(t_index) * n_paths + path) * dim;
  }
  // Per-(path, step) auxiliary uniform fed to the coefficients.
  double aux(std::size_t path, int step) const {
    return rng::uniform(seed, rng::Channel::kAux, path,
                        static_cast<std::uint64_t>(step), 0);
  }
  // Brownian increment of the given step (regenerated, never stored).
  void increment(std::size_t path, int step, double* out /* noise_dim */) const;

  void drift_value(const CoefficientModel& model, std::size_t path, int step,
                   double* out) const;
  void diffusion_value(const CoefficientModel& model, std::size_t path,
                       int step, double* out) const;
};

PathBundle simulate_paths(const CoefficientModel& model, const TimeGrid& grid,
                          std::size_t n_paths, const InitialLaw& init,
                          std::uint64_t seed, int n_threads = 1);

/// Uniform-weight empirical measure of the ensemble at one grid time.
EmpiricalMeasure marginal(const PathBundle& paths, int t_index);

struct ValidationReport {
  double max_bound = 0.0;             // max over probes of |b| + |sigma|
  double min_ellipticity_ratio = 0.0; // min over probes of a l.l / |l|^2
  bool bound_ok = false;
  bool ellipticity_ok = false;
  std::size_t n_probes = 0;
  bool pass() const { return bound_ok && ellipticity_ok; }
};

struct CoefficientProbe {
  double t;
  std::vector<double> x;
  std::vector<double> lambda;
};

// Probe set with canonical basis vectors and random unit vectors as lambda.
std::vector<CoefficientProbe> make_probe_set(const CoefficientModel& model,
                                             double horizon, std::size_t count,
                                             std::uint64_t seed);

ValidationReport validate_coefficients(
    const CoefficientModel& model, const std::vector<CoefficientProbe>& probe);

}  // namespace itoflow
