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
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "itoflow/config.hpp"
#include "itoflow/rng.hpp"
#include "json.hpp"

namespace itoflow {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "1.0.0";
constexpr double kResidualFloor = 1e-12;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double series_at(const std::vector<double>& v, std::size_t i) {
  return i < v.size() ? v[i] : 0.0;
}

std::string formula_csv(const FormulaReport& r) {
  std::string out =
      "t,lhs,drift_term,diffusion_term,time_term,space_drift_term,"
      "space_diffusion_term,martingale_term,residual,mc_stderr\n";
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    out += fmt17(r.times[i]);
    for (const auto* col :
         {&r.lhs, &r.drift_term, &r.diffusion_term, &r.time_term,
          &r.space_drift_term, &r.space_diffusion_term, &r.martingale_term,
          &r.residual, &r.mc_stderr}) {
      out += ',';
      out += fmt17(series_at(*col, i));
    }
    out += '\n';
  }
  return out;
}

std::string inequality_csv(const InequalityReport& r) {
  std::string out = "index,lhs,rhs,lhs_se\n";
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    out += std::to_string(i) + ',' + fmt17(r.samples[i].first) + ',' +
           fmt17(r.samples[i].second) + ',' +
           fmt17(i < r.lhs_se.size() ? r.lhs_se[i] : 0.0) + '\n';
  }
  return out;
}

std::string convergence_csv(const ConvergenceTable& t) {
  std::string out = "n_steps,n_paths,max_residual\n";
  for (std::size_t si = 0; si < t.n_steps_list.size(); ++si) {
    for (std::size_t pi = 0; pi < t.n_paths_list.size(); ++pi) {
      out += std::to_string(t.n_steps_list[si]) + ',' +
             std::to_string(t.n_paths_list[pi]) + ',' +
             fmt17(t.max_residual[si][pi]) + '\n';
    }
  }
  return out;
}

// Small random cloud for the measure diagnostics; deterministic in
// (seed, stream).
EmpiricalMeasure random_cloud(int dim, std::size_t n_atoms, std::uint64_t seed,
                              std::uint64_t stream) {
  EmpiricalMeasure mu;
  mu.dim = dim;
  mu.points.resize(n_atoms * dim);
  mu.weights.assign(n_atoms, 1.0 / n_atoms);
  for (std::size_t j = 0; j < n_atoms; ++j) {
    for (int c = 0; c < dim; ++c) {
      mu.points[j * dim + c] =
          2.0 * rng::uniform(seed, rng::Channel::kSample, stream, j, c) - 1.0;
    }
  }
  return mu;
}

void check_declared_bounds(const CoefficientModel& model, double horizon,
                           std::uint64_t seed) {
  const auto probes = make_probe_set(model, horizon, 64, seed);
  const auto report = validate_coefficients(model, probes);
  if (!report.pass()) {
    throw NumericError("run: coefficient model violates its declared bounds");
  }
}

InequalityReport run_diagnostic(const ExperimentConfig& cfg,
                                const RunOptions& options) {
  const std::uint64_t seed = cfg.ensemble.seed;
  if (cfg.diagnostic == "krylov") {
    const CoefficientModel model = build_model(cfg.model);
    check_declared_bounds(model, cfg.grid.horizon, seed);
    const InitialLaw init = build_init(cfg.ensemble.init, model.dim);
    const PathBundle paths = simulate_paths(model, cfg.grid,
                                            cfg.ensemble.n_paths, init, seed,
                                            options.n_threads);
    const double p_exp = cfg.param_p >= model.dim
                             ? cfg.param_p
                             : static_cast<double>(model.dim);
    return krylov_check(paths, model, krylov_test_family(cfg.grid.horizon),
                        p_exp);
  }
  if (cfg.diagnostic == "density_integrability") {
    return density_integrability_check(cfg.param_k, cfg.model.dim,
                                       cfg.grid.horizon);
  }
  if (cfg.diagnostic == "joint_integrability") {
    return joint_integrability_check(cfg.param_k, cfg.param_alpha,
                                     cfg.model.dim, cfg.grid.horizon);
  }
  if (cfg.diagnostic == "contraction") {
    InequalityReport all;
    all.name = "contraction";
    all.pass = true;
    for (std::uint64_t t = 0; t < 20; ++t) {
      const auto mu = random_cloud(cfg.model.dim, 8, seed, 3 * t);
      const auto nu = random_cloud(cfg.model.dim, 8, seed, 3 * t + 1);
      const auto m = random_cloud(cfg.model.dim, 8, seed, 3 * t + 2);
      const auto one = contraction_check(mu, nu, m);
      all.samples.insert(all.samples.end(), one.samples.begin(),
                         one.samples.end());
      all.max_ratio = std::max(all.max_ratio, one.max_ratio);
      all.pass = all.pass && one.pass;
    }
    return all;
  }
  if (cfg.diagnostic == "mollify") {
    const auto mu = random_cloud(cfg.model.dim, 8, seed, 0);
    const std::vector<int> n_list{2, 4, 8, 16, 32};
    const auto values =
        mollify_convergence_check(mu, n_list, cfg.mollifier_nodes);
    InequalityReport report;
    report.name = "mollify";
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      report.samples.emplace_back(values[i], 1.0 / n_list[i]);
      report.max_ratio = std::max(report.max_ratio, values[i] * n_list[i]);
    }
    report.pass = true;  // the check throws on violation
    return report;
  }
  if (cfg.diagnostic == "lp_convolution") {
    // Gaussian sampled against a normalized triangle bump.
    GriddedField f{-6.0, 0.01, {}};
    GriddedField g{-1.0, 0.01, {}};
    for (int i = 0; i <= 1200; ++i) {
      const double x = f.origin + i * f.spacing;
      f.values.push_back(std::exp(-x * x));
    }
    for (int i = 0; i <= 200; ++i) {
      const double x = g.origin + i * g.spacing;
      g.values.push_back(std::max(0.0, 1.0 - std::abs(x)));
    }
    return lp_convolution_check(f, g, cfg.param_p);
  }
  throw std::invalid_argument("run: unknown diagnostic '" + cfg.diagnostic +
                              "'");
}

json inequality_summary(const InequalityReport& r) {
  json j;
  j["name"] = r.name;
  j["pass"] = r.pass;
  j["max_ratio"] = r.max_ratio;
  j["n_samples"] = r.samples.size();
  if (r.slope_expected != 0.0) {
    j["slope"] = r.slope;
    j["slope_expected"] = r.slope_expected;
  }
  if (r.integral_closed_form != 0.0) {
    j["integrand_power"] = r.integrand_power;
    j["integral_value"] = r.integral_value;
    j["integral_closed_form"] = r.integral_closed_form;
  }
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

}  // namespace

std::string emit_plot_data(const RunReport& report) {
  if (!report.has_formula) {
    throw std::invalid_argument("emit_plot_data: no per-time series in report");
  }
  const FormulaReport& r = report.formula;
  const double band = report.config.band_factor;
  std::string out = "# t lhs rhs_total residual band_lo band_hi\n";
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    const double lhs = series_at(r.lhs, i);
    const double res = series_at(r.residual, i);
    const double se = series_at(r.mc_stderr, i);
    out += fmt17(r.times[i]) + ' ' + fmt17(lhs) + ' ' + fmt17(lhs - res) +
           ' ' + fmt17(res) + ' ' + fmt17(-band * se) + ' ' + fmt17(band * se) +
           '\n';
  }
  return out;
}

RunReport run(const ExperimentConfig& cfg_in, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = cfg_in;
  if (options.seed) {
    cfg.ensemble.seed = *options.seed;
    if (cfg.x_ensemble) cfg.x_ensemble->seed = *options.seed + 1;
  }
  RunReport report;
  report.config = cfg;
  const BootstrapSpec bootstrap{cfg.n_resamples, cfg.n_blocks};
  json summary;
  summary["scenario"] = cfg.scenario;
  summary["version"] = kVersion;
  summary["rng_scheme"] = rng::kSchemeId;

  if (cfg.scenario == "measure_flow" || cfg.scenario == "time_linear") {
    const CoefficientModel model = build_model(cfg.model);
    check_declared_bounds(model, cfg.grid.horizon, cfg.ensemble.seed);
    const InitialLaw init = build_init(cfg.ensemble.init, model.dim);
    const PathBundle paths =
        simulate_paths(model, cfg.grid, cfg.ensemble.n_paths, init,
                       cfg.ensemble.seed, options.n_threads);
    if (cfg.scenario == "measure_flow") {
      MeasureFunctional f = make_functional(cfg.functional, model.dim);
      if (cfg.mollifier_n > 0) {
        f = mollified(f, mollifier_make(cfg.mollifier_n, model.dim),
                      cfg.mollifier_nodes);
      }
      report.formula =
          verify_measure_flow(f, paths, model, bootstrap, options.n_threads);
    } else {
      const TimeField g = make_time_field(cfg.functional, model.dim);
      report.formula =
          verify_time_linear(g, paths, model, bootstrap, options.n_threads);
    }
    report.has_formula = true;
  } else if (cfg.scenario == "extended") {
    const CoefficientModel xi_model = build_model(cfg.model);
    const ModelSpec x_spec = cfg.x_model ? *cfg.x_model : cfg.model;
    const CoefficientModel x_model = build_model(x_spec);
    check_declared_bounds(xi_model, cfg.grid.horizon, cfg.ensemble.seed);
    check_declared_bounds(x_model, cfg.grid.horizon, cfg.x_ensemble->seed);
    const InitialLaw xi_init = build_init(cfg.ensemble.init, xi_model.dim);
    const InitialLaw x_init =
        build_init(cfg.x_ensemble->init, x_model.dim);
    const PathBundle xi_paths =
        simulate_paths(xi_model, cfg.grid, cfg.ensemble.n_paths, xi_init,
                       cfg.ensemble.seed, options.n_threads);
    const PathBundle x_paths =
        simulate_paths(x_model, cfg.grid, cfg.x_ensemble->n_paths, x_init,
                       cfg.x_ensemble->seed, options.n_threads);
    const ExtendedFunctional f =
        make_extended_functional(cfg.functional, xi_model.dim);
    report.formula = verify_extended(f, xi_paths, xi_model, x_paths, x_model,
                                     bootstrap, options.n_threads);
    report.has_formula = true;
  } else if (cfg.scenario == "diagnostic") {
    report.inequality = run_diagnostic(cfg, options);
    report.has_inequality = true;
  } else if (cfg.scenario == "convergence") {
    const CoefficientModel model = build_model(cfg.model);
    check_declared_bounds(model, cfg.grid.horizon, cfg.ensemble.seed);
    const InitialLaw init = build_init(cfg.ensemble.init, model.dim);
    const MeasureFunctional f = make_functional(cfg.functional, model.dim);
    report.convergence = convergence_study(
        f, model, init, cfg.grid.horizon, cfg.n_steps_list, cfg.n_paths_list,
        cfg.ensemble.seed, cfg.replicates, options.n_threads);
    report.has_convergence = true;
  } else {
    throw std::invalid_argument("run: unknown scenario '" + cfg.scenario +
                                "'");
  }

  if (report.has_formula) {
    report.csv = formula_csv(report.formula);
    report.pass =
        report.formula.within_band(cfg.band_factor, kResidualFloor);
    summary["functional"] = report.formula.functional_name;
    summary["max_abs_residual"] = report.formula.max_abs_residual();
    summary["n_resamples"] = report.formula.n_resamples;
    if (cfg.scenario == "extended") {
      summary["per_path_residual_sup"] = report.formula.per_path_residual_sup;
      summary["martingale_mean"] = report.formula.martingale_mean;
      summary["martingale_mean_se"] = report.formula.martingale_mean_se;
    }
  } else if (report.has_inequality) {
    report.csv = inequality_csv(report.inequality);
    report.pass = report.inequality.pass;
    summary["diagnostic"] = inequality_summary(report.inequality);
  } else {
    report.csv = convergence_csv(report.convergence);
    const ConvergenceTable& t = report.convergence;
    const auto& coarse = t.max_residual.front();
    const auto& fine = t.max_residual.back();
    report.pass = std::abs(t.slope_n_paths + 0.5) <= 0.15 &&
                  fine.back() <= coarse.back();
    summary["functional"] = cfg.functional;
    summary["slope_dt"] = t.slope_dt;
    summary["slope_n_paths"] = t.slope_n_paths;
  }
  report.exit_code = report.pass ? 0 : 2;
  summary["pass"] = report.pass;
  summary["config"] = json::parse(serialize_config(cfg));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  summary["wall_seconds"] = report.wall_seconds;
  report.summary_json = summary.dump(2);

  if (!options.out_dir.empty()) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) {
      throw std::runtime_error("run: cannot create output directory '" +
                               options.out_dir + "': " + ec.message());
    }
    auto write_file = [&](const std::string& name, const std::string& body) {
      const fs::path path = fs::path(options.out_dir) / name;
      std::ofstream out(path, std::ios::binary);
      if (!out) {
        throw std::runtime_error("run: cannot open '" + path.string() + "'");
      }
      out << body;
      if (!out.flush()) {
        throw std::runtime_error("run: short write to '" + path.string() +
                                 "'");
      }
    };
    write_file("report.csv", report.csv);
    write_file("summary.json", report.summary_json + "\n");
    write_file("config.json", serialize_config(cfg) + "\n");
    if (report.has_formula) write_file("plot.dat", emit_plot_data(report));
  }
  return report;
}

}  // namespace itoflow
