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
#include "itoflow/config.hpp"

#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace itoflow {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where + " must be an object");
}

void reject_unknown(const json& j, const std::string& where,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) fail("unknown key '" + key + "' in " + where);
  }
}

double get_number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) fail("'" + key + "' must be a number");
  return j[key].get<double>();
}

std::int64_t get_int(const json& j, const std::string& key,
                     std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) fail("'" + key + "' must be an integer");
  return j[key].get<std::int64_t>();
}

std::string get_string(const json& j, const std::string& key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) fail("'" + key + "' must be a string");
  return j[key].get<std::string>();
}

std::vector<double> get_doubles(const json& j, const std::string& key) {
  if (!j.contains(key)) return {};
  if (!j[key].is_array()) fail("'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : j[key]) {
    if (!e.is_number()) fail("'" + key + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

ModelSpec parse_model(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where,
                 {"preset", "dim", "noise_dim", "beta", "scale", "rate",
                  "bound", "ellipticity"});
  ModelSpec m;
  m.preset = get_string(j, "preset", m.preset);
  m.dim = static_cast<int>(get_int(j, "dim", m.dim));
  m.noise_dim = static_cast<int>(get_int(j, "noise_dim", m.noise_dim));
  m.beta = get_doubles(j, "beta");
  m.scale = get_number(j, "scale", m.scale);
  m.rate = get_number(j, "rate", m.rate);
  m.bound = get_number(j, "bound", m.bound);
  m.ellipticity = get_number(j, "ellipticity", m.ellipticity);
  if (m.dim < 1) fail(where + ".dim must be >= 1");
  if (m.noise_dim != 0 && m.noise_dim < m.dim) {
    fail(where + ".noise_dim must be 0 or >= dim");
  }
  if (!(m.scale > 0.0)) fail(where + ".scale must be > 0");
  if (m.ellipticity < 0.0 ||
      (j.contains("ellipticity") && !(m.ellipticity > 0.0))) {
    fail(where + ".ellipticity must be > 0 when given");
  }
  if (!m.beta.empty() && static_cast<int>(m.beta.size()) != m.dim) {
    fail(where + ".beta must have dim entries");
  }
  return m;
}

InitSpec parse_init(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where, {"kind", "center", "scale"});
  InitSpec init;
  init.kind = get_string(j, "kind", init.kind);
  init.center = get_doubles(j, "center");
  init.scale = get_doubles(j, "scale");
  if (init.kind != "point" && init.kind != "gaussian" &&
      init.kind != "uniform_ball") {
    fail(where + ".kind must be point, gaussian, or uniform_ball");
  }
  return init;
}

EnsembleSpec parse_ensemble(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where, {"n_paths", "seed", "init"});
  EnsembleSpec e;
  const auto n = get_int(j, "n_paths", static_cast<std::int64_t>(e.n_paths));
  if (n < 1) fail(where + ".n_paths must be >= 1");
  e.n_paths = static_cast<std::size_t>(n);
  const auto s = get_int(j, "seed", static_cast<std::int64_t>(e.seed));
  if (s < 0) fail(where + ".seed must be >= 0");
  e.seed = static_cast<std::uint64_t>(s);
  if (j.contains("init")) e.init = parse_init(j["init"], where + ".init");
  return e;
}

TimeGrid parse_grid(const json& j) {
  require_object(j, "grid");
  reject_unknown(j, "grid", {"horizon", "n_steps"});
  TimeGrid g;
  g.horizon = get_number(j, "horizon", g.horizon);
  g.n_steps = static_cast<int>(get_int(j, "n_steps", g.n_steps));
  if (!(g.horizon > 0.0)) fail("grid.horizon must be > 0");
  if (g.n_steps < 1) fail("grid.n_steps must be >= 1");
  return g;
}

json model_to_json(const ModelSpec& m) {
  json j;
  j["preset"] = m.preset;
  j["dim"] = m.dim;
  j["noise_dim"] = m.noise_dim;
  j["beta"] = m.beta;
  j["scale"] = m.scale;
  j["rate"] = m.rate;
  if (m.bound > 0.0) j["bound"] = m.bound;
  if (m.ellipticity > 0.0) j["ellipticity"] = m.ellipticity;
  return j;
}

json init_to_json(const InitSpec& init) {
  json j;
  j["kind"] = init.kind;
  j["center"] = init.center;
  j["scale"] = init.scale;
  return j;
}

json ensemble_to_json(const EnsembleSpec& e) {
  json j;
  j["n_paths"] = e.n_paths;
  j["seed"] = e.seed;
  j["init"] = init_to_json(e.init);
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  require_object(root, "top level");
  reject_unknown(root, "top level",
                 {"scenario", "model", "grid", "ensemble", "functional",
                  "mollifier_n", "mollifier_nodes", "x_model", "x_ensemble",
                  "diagnostic", "param_k", "param_alpha", "param_p",
                  "n_steps_list", "n_paths_list", "replicates", "band_factor",
                  "n_resamples", "n_blocks"});

  ExperimentConfig cfg;
  cfg.scenario = get_string(root, "scenario", "");
  static const std::set<std::string> kScenarios{
      "measure_flow", "extended", "time_linear", "diagnostic", "convergence"};
  if (!kScenarios.count(cfg.scenario)) {
    fail("scenario must be one of measure_flow, extended, time_linear, "
         "diagnostic, convergence");
  }
  if (root.contains("model")) cfg.model = parse_model(root["model"], "model");
  if (root.contains("grid")) cfg.grid = parse_grid(root["grid"]);
  if (root.contains("ensemble")) {
    cfg.ensemble = parse_ensemble(root["ensemble"], "ensemble");
  }
  cfg.functional = get_string(root, "functional", "");
  cfg.mollifier_n =
      static_cast<int>(get_int(root, "mollifier_n", cfg.mollifier_n));
  cfg.mollifier_nodes =
      static_cast<int>(get_int(root, "mollifier_nodes", cfg.mollifier_nodes));
  if (cfg.mollifier_n < 0) fail("mollifier_n must be >= 0");
  if (cfg.mollifier_nodes < 2) fail("mollifier_nodes must be >= 2");

  if (root.contains("x_model")) {
    cfg.x_model = parse_model(root["x_model"], "x_model");
  }
  if (root.contains("x_ensemble")) {
    cfg.x_ensemble = parse_ensemble(root["x_ensemble"], "x_ensemble");
  }

  cfg.diagnostic = get_string(root, "diagnostic", "");
  cfg.param_k = get_number(root, "param_k", cfg.param_k);
  cfg.param_alpha = get_number(root, "param_alpha", cfg.param_alpha);
  cfg.param_p = get_number(root, "param_p", cfg.param_p);

  if (root.contains("n_steps_list")) {
    for (const auto& e : root["n_steps_list"]) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 1) {
        fail("n_steps_list entries must be positive integers");
      }
      cfg.n_steps_list.push_back(static_cast<int>(e.get<std::int64_t>()));
    }
  }
  if (root.contains("n_paths_list")) {
    for (const auto& e : root["n_paths_list"]) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 1) {
        fail("n_paths_list entries must be positive integers");
      }
      cfg.n_paths_list.push_back(
          static_cast<std::size_t>(e.get<std::int64_t>()));
    }
  }
  cfg.replicates = static_cast<int>(get_int(root, "replicates", 1));
  if (cfg.replicates < 1) fail("replicates must be >= 1");

  cfg.band_factor = get_number(root, "band_factor", cfg.band_factor);
  if (!(cfg.band_factor > 0.0)) fail("band_factor must be > 0");
  cfg.n_resamples =
      static_cast<int>(get_int(root, "n_resamples", cfg.n_resamples));
  cfg.n_blocks = static_cast<int>(get_int(root, "n_blocks", cfg.n_blocks));
  if (cfg.n_resamples < 2) fail("n_resamples must be >= 2");
  if (cfg.n_blocks < 2) fail("n_blocks must be >= 2");

  // Scenario-specific completeness checks.
  if (cfg.scenario == "measure_flow" || cfg.scenario == "extended" ||
      cfg.scenario == "time_linear" || cfg.scenario == "convergence") {
    if (cfg.functional.empty()) fail("'functional' is required");
  }
  if (cfg.scenario == "extended") {
    if (!cfg.x_ensemble) fail("extended scenario requires 'x_ensemble'");
  }
  if (cfg.scenario == "diagnostic" && cfg.diagnostic.empty()) {
    fail("diagnostic scenario requires 'diagnostic'");
  }
  if (cfg.scenario == "convergence") {
    if (cfg.n_steps_list.size() < 2 || cfg.n_paths_list.size() < 2) {
      fail("convergence scenario requires n_steps_list and n_paths_list "
           "with at least two entries each");
    }
  }
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["scenario"] = cfg.scenario;
  j["model"] = model_to_json(cfg.model);
  j["grid"] = {{"horizon", cfg.grid.horizon}, {"n_steps", cfg.grid.n_steps}};
  j["ensemble"] = ensemble_to_json(cfg.ensemble);
  if (!cfg.functional.empty()) j["functional"] = cfg.functional;
  if (cfg.mollifier_n > 0) {
    j["mollifier_n"] = cfg.mollifier_n;
    j["mollifier_nodes"] = cfg.mollifier_nodes;
  }
  if (cfg.x_model) j["x_model"] = model_to_json(*cfg.x_model);
  if (cfg.x_ensemble) j["x_ensemble"] = ensemble_to_json(*cfg.x_ensemble);
  if (!cfg.diagnostic.empty()) {
    j["diagnostic"] = cfg.diagnostic;
    j["param_k"] = cfg.param_k;
    j["param_alpha"] = cfg.param_alpha;
    j["param_p"] = cfg.param_p;
  }
  if (!cfg.n_steps_list.empty()) j["n_steps_list"] = cfg.n_steps_list;
  if (!cfg.n_paths_list.empty()) j["n_paths_list"] = cfg.n_paths_list;
  if (cfg.replicates != 1) j["replicates"] = cfg.replicates;
  j["band_factor"] = cfg.band_factor;
  j["n_resamples"] = cfg.n_resamples;
  j["n_blocks"] = cfg.n_blocks;
  return j.dump(2);
}

namespace {

// Saturation level for the mean-reverting drift; keeps |b| bounded while
// leaving the dynamics untouched near the origin.
constexpr double kOuCap = 4.0;

}  // namespace

CoefficientModel build_model(const ModelSpec& spec) {
  CoefficientModel model;
  model.dim = spec.dim;
  model.noise_dim = spec.noise_dim == 0 ? spec.dim : spec.noise_dim;
  const int d = model.dim;
  const int d1 = model.noise_dim;
  std::vector<double> beta(d, 0.0);
  for (std::size_t c = 0; c < spec.beta.size(); ++c) beta[c] = spec.beta[c];
  const double scale = spec.scale;
  double beta_norm = 0.0;
  for (double b : beta) beta_norm += b * b;
  beta_norm = std::sqrt(beta_norm);

  if (spec.preset == "constant") {
    model.drift = [beta, d](double, const double*, double, double* out) {
      std::memcpy(out, beta.data(), d * sizeof(double));
    };
    model.diffusion = [scale, d, d1](double, const double*, double,
                                     double* out) {
      std::fill(out, out + static_cast<std::size_t>(d) * d1, 0.0);
      for (int c = 0; c < d; ++c) out[c * d1 + c] = scale;
    };
    model.bound = beta_norm + scale * std::sqrt(static_cast<double>(d));
  } else if (spec.preset == "ou") {
    const double rate = spec.rate;
    if (!(rate > 0.0)) {
      throw std::invalid_argument("config: model.rate must be > 0 for ou");
    }
    model.drift = [beta, rate, d](double, const double* x, double,
                                  double* out) {
      for (int c = 0; c < d; ++c) {
        out[c] = beta[c] - rate * kOuCap * std::tanh(x[c] / kOuCap);
      }
    };
    model.diffusion = [scale, d, d1](double, const double*, double,
                                     double* out) {
      std::fill(out, out + static_cast<std::size_t>(d) * d1, 0.0);
      for (int c = 0; c < d; ++c) out[c * d1 + c] = scale;
    };
    model.bound = beta_norm +
                  rate * kOuCap * std::sqrt(static_cast<double>(d)) +
                  scale * std::sqrt(static_cast<double>(d));
  } else if (spec.preset == "rotation") {
    if (d != 2 || d1 != 2) {
      throw std::invalid_argument("config: rotation preset requires dim 2");
    }
    model.drift = [beta](double, const double*, double, double* out) {
      out[0] = beta[0];
      out[1] = beta[1];
    };
    // State-dependent planar rotation; sigma sigma^T = scale^2 I always.
    model.diffusion = [scale](double, const double* x, double, double* out) {
      const double c = std::cos(x[0]), s = std::sin(x[0]);
      out[0] = scale * c;
      out[1] = -scale * s;
      out[2] = scale * s;
      out[3] = scale * c;
    };
    model.bound = beta_norm + scale * std::sqrt(2.0);
  } else {
    throw std::invalid_argument("config: unknown model preset '" +
                                spec.preset + "'");
  }
  model.ellipticity =
      spec.ellipticity > 0.0 ? spec.ellipticity : scale * scale;
  if (spec.bound > 0.0) model.bound = spec.bound;
  model.validate();
  return model;
}

InitialLaw build_init(const InitSpec& spec, int dim) {
  InitialLaw law;
  law.center = spec.center;
  law.center.resize(dim, 0.0);
  if (spec.kind == "point") {
    law.kind = InitialLaw::Kind::kPoint;
  } else if (spec.kind == "gaussian") {
    law.kind = InitialLaw::Kind::kGaussian;
    law.scale = spec.scale;
    law.scale.resize(dim, spec.scale.empty() ? 1.0 : spec.scale.back());
  } else if (spec.kind == "uniform_ball") {
    law.kind = InitialLaw::Kind::kUniformBall;
    law.scale = {spec.scale.empty() ? 1.0 : spec.scale.front()};
  } else {
    throw std::invalid_argument("config: unknown init kind '" + spec.kind +
                                "'");
  }
  return law;
}

}  // namespace itoflow
