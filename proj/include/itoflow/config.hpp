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

#include <optional>
#include <string>
#include <vector>

#include "itoflow/diagnostics.hpp"
#include "itoflow/formula.hpp"

namespace itoflow {

/// Named coefficient presets:
///   constant: b = beta, sigma = scale * I (padded to noise_dim)
///   ou:       b = -rate * x + beta, sigma = scale * I
///   rotation: d = 2 planar rotation sigma, b = beta
struct ModelSpec {
  std::string preset = "constant";
  int dim = 1;
  int noise_dim = 0;  // 0 means dim
  std::vector<double> beta;
  double scale = 1.0;
  double rate = 0.5;
  double bound = 0.0;        // declared K; 0 = derived from the preset
  double ellipticity = 0.0;  // declared delta; 0 = derived
};

struct InitSpec {
  std::string kind = "point";  // point | gaussian | uniform_ball
  std::vector<double> center;
  std::vector<double> scale;
};

struct EnsembleSpec {
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  InitSpec init;
};

struct ExperimentConfig {
  std::string scenario;  // measure_flow | extended | time_linear |
                         // diagnostic | convergence
  ModelSpec model;
  TimeGrid grid;
  EnsembleSpec ensemble;
  std::string functional;  // registry name; time-field id for time_linear
  int mollifier_n = 0;     // 0 = no mollification
  int mollifier_nodes = 12;

  // extended scenario: the independent-copy ensemble.
  std::optional<ModelSpec> x_model;
  std::optional<EnsembleSpec> x_ensemble;

  // diagnostic scenario.
  std::string diagnostic;  // krylov | density_integrability |
                           // joint_integrability | contraction | mollify |
                           // lp_convolution
  double param_k = 2.0;
  double param_alpha = 1.0;
  double param_p = 1.0;

  // convergence scenario.
  std::vector<int> n_steps_list;
  std::vector<std::size_t> n_paths_list;
  int replicates = 1;

  double band_factor = 3.0;
  int n_resamples = 200;
  int n_blocks = 200;
};

ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& cfg);

CoefficientModel build_model(const ModelSpec& spec);
InitialLaw build_init(const InitSpec& spec, int dim);

struct RunOptions {
  std::string out_dir;  // empty = no files written
  std::optional<std::uint64_t> seed;
  int n_threads = 1;
};

struct RunReport {
  ExperimentConfig config;
  bool pass = false;
  int exit_code = 0;  // 0 pass, 2 numeric/hypothesis failure
  double wall_seconds = 0.0;
  std::string csv;           // per-grid-time table
  std::string summary_json;  // machine-readable summary
  FormulaReport formula;
  InequalityReport inequality;
  ConvergenceTable convergence;
  bool has_formula = false;
  bool has_inequality = false;
  bool has_convergence = false;
};

RunReport run(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Columnar plot file: t, lhs, rhs_total, residual, band_lo, band_hi.
std::string emit_plot_data(const RunReport& report);

}  // namespace itoflow
