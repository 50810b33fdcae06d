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

#include "itoflow/functional.hpp"
#include "itoflow/process.hpp"

namespace itoflow {

/// Monte Carlo error estimation: block bootstrap over paths. Paths are
/// grouped into fixed blocks (boundaries depend only on the path count) and
/// blocks are resampled with replacement; sufficient-statistic reductions
/// make the resampling cost independent of the functional evaluation cost.
struct BootstrapSpec {
  int n_resamples = 200;
  int n_blocks = 200;  // capped at n_paths (and lower for pair kernels)
};

/// Per-grid-time decomposition of one Ito-Krylov identity. All term series
/// are cumulative integrals up to t; residual(t) = lhs(t) - sum of terms.
struct FormulaReport {
  std::vector<double> times;
  std::vector<double> lhs;
  std::vector<double> drift_term;
  std::vector<double> diffusion_term;
  std::vector<double> time_term;
  std::vector<double> space_drift_term;
  std::vector<double> space_diffusion_term;
  std::vector<double> martingale_term;
  std::vector<double> residual;
  std::vector<double> mc_stderr;

  // Extended-identity extras.
  double per_path_residual_sup = 0.0;
  double martingale_mean = 0.0;     // path average at the horizon
  double martingale_mean_se = 0.0;  // bootstrap SE of that average

  std::string functional_name;
  std::string scenario;
  int n_resamples = 0;

  double max_abs_residual() const;
  // |residual(t)| <= band_factor * mc_stderr(t) + floor at every grid time.
  bool within_band(double band_factor, double floor = 0.0) const;
};

/// Measure-only identity: u(mu_t) against the drift and diffusion terms.
FormulaReport verify_measure_flow(const MeasureFunctional& f,
                                  const PathBundle& paths,
                                  const CoefficientModel& model,
                                  const BootstrapSpec& bootstrap = {},
                                  int n_threads = 1);

/// Time/space/measure identity on two independent ensembles: xi carries the
/// outer process, x_paths realizes the independent-copy expectations.
FormulaReport verify_extended(const ExtendedFunctional& f,
                              const PathBundle& xi_paths,
                              const CoefficientModel& xi_model,
                              const PathBundle& x_paths,
                              const CoefficientModel& x_model,
                              const BootstrapSpec& bootstrap = {},
                              int n_threads = 1);

/// Time-linear special case u(t, mu) = int g(t, x) dmu(x).
FormulaReport verify_time_linear(const TimeField& g, const PathBundle& paths,
                                 const CoefficientModel& model,
                                 const BootstrapSpec& bootstrap = {},
                                 int n_threads = 1);

/// Grid of max-|residual| over (n_steps, n_paths) cells with log-log slope
/// fits: in dt at the largest path count, in n_paths at the finest grid.
struct ConvergenceTable {
  std::vector<int> n_steps_list;
  std::vector<std::size_t> n_paths_list;
  std::vector<std::vector<double>> max_residual;  // [step index][path index]
  double slope_dt = 0.0;
  double slope_n_paths = 0.0;
};

ConvergenceTable convergence_study(const MeasureFunctional& f,
                                   const CoefficientModel& model,
                                   const InitialLaw& init, double horizon,
                                   const std::vector<int>& n_steps_list,
                                   const std::vector<std::size_t>& n_paths_list,
                                   std::uint64_t seed, int replicates = 1,
                                   int n_threads = 1);

/// Least-squares slope of y against x (used for the log-log fits).
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace itoflow
