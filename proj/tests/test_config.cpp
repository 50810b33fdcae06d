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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "itoflow/config.hpp"

using namespace itoflow;

namespace {

const char* kFlowConfig = R"({
  "scenario": "measure_flow",
  "functional": "second_moment",
  "model": {"preset": "constant", "dim": 1, "scale": 1.0},
  "grid": {"horizon": 0.5, "n_steps": 20},
  "ensemble": {"n_paths": 2000, "seed": 3,
               "init": {"kind": "point", "center": [0.0]}}
})";

}  // namespace

TEST_CASE("configs round-trip through serialization") {
  const auto cfg = parse_config(kFlowConfig);
  const auto again = parse_config(serialize_config(cfg));
  CHECK(again.scenario == cfg.scenario);
  CHECK(again.functional == cfg.functional);
  CHECK(again.grid == cfg.grid);
  CHECK(again.ensemble.n_paths == cfg.ensemble.n_paths);
  CHECK(again.ensemble.seed == cfg.ensemble.seed);
  CHECK(again.model.preset == cfg.model.preset);
  CHECK(serialize_config(again) == serialize_config(cfg));
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    parse_config(R"({"scenario":"measure_flow","functional":"second_moment",
                     "bogus_key": 1})");
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
  CHECK_THROWS_AS(
      parse_config(R"({"scenario":"measure_flow","functional":"second_moment",
                       "model":{"dims":2}})"),
      std::invalid_argument);
}

TEST_CASE("validation rejects bad fields") {
  CHECK_THROWS_AS(parse_config("not json"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"scenario":"nope"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"scenario":"measure_flow"})"),
                  std::invalid_argument);  // functional missing
  CHECK_THROWS_AS(
      parse_config(R"({"scenario":"measure_flow","functional":"x",
                       "grid":{"horizon":-1.0}})"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      parse_config(R"({"scenario":"measure_flow","functional":"x",
                       "model":{"dim":1,"ellipticity":0.0}})"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      parse_config(R"({"scenario":"measure_flow","functional":"x",
                       "ensemble":{"n_paths":0}})"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      parse_config(R"({"scenario":"extended","functional":"bilinear:g=prod"})"),
      std::invalid_argument);  // x_ensemble missing
  CHECK_THROWS_AS(
      parse_config(R"({"scenario":"convergence","functional":"x",
                       "n_steps_list":[10],"n_paths_list":[100]})"),
      std::invalid_argument);
}

TEST_CASE("model presets declare constants they actually satisfy") {
  for (const char* preset : {"constant", "ou"}) {
    ModelSpec spec;
    spec.preset = preset;
    spec.dim = 2;
    spec.beta = {0.4, -0.1};
    spec.scale = 0.8;
    const auto model = build_model(spec);
    const auto probes = make_probe_set(model, 1.0, 64, 5);
    CHECK(validate_coefficients(model, probes).pass());
  }
  ModelSpec rot;
  rot.preset = "rotation";
  rot.dim = 2;
  const auto model = build_model(rot);
  const auto probes = make_probe_set(model, 1.0, 64, 6);
  CHECK(validate_coefficients(model, probes).pass());
  ModelSpec bad = rot;
  bad.dim = 3;
  CHECK_THROWS_AS(build_model(bad), std::invalid_argument);
  ModelSpec unknown;
  unknown.preset = "nope";
  CHECK_THROWS_AS(build_model(unknown), std::invalid_argument);
}

TEST_CASE("init specs build the matching laws") {
  InitSpec gauss;
  gauss.kind = "gaussian";
  gauss.center = {1.0};
  gauss.scale = {2.0};
  const auto law = build_init(gauss, 1);
  CHECK(law.kind == InitialLaw::Kind::kGaussian);
  CHECK(law.center == std::vector<double>{1.0});
  CHECK(law.scale == std::vector<double>{2.0});
  InitSpec ball;
  ball.kind = "uniform_ball";
  const auto blaw = build_init(ball, 3);
  CHECK(blaw.kind == InitialLaw::Kind::kUniformBall);
  CHECK(blaw.scale == std::vector<double>{1.0});
}

TEST_CASE("run writes the full artifact set") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "itoflow_run_test";
  fs::remove_all(dir);
  RunOptions options;
  options.out_dir = dir.string();
  const auto report = run(parse_config(kFlowConfig), options);
  CHECK(report.pass);
  CHECK(report.exit_code == 0);
  CHECK(report.has_formula);
  for (const char* name :
       {"report.csv", "summary.json", "config.json", "plot.dat"}) {
    CHECK(fs::exists(dir / name));
  }
  std::ifstream csv(dir / "report.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header ==
        "t,lhs,drift_term,diffusion_term,time_term,space_drift_term,"
        "space_diffusion_term,martingale_term,residual,mc_stderr");
  fs::remove_all(dir);
}

TEST_CASE("plot data columns are consistent with the report") {
  const auto report = run(parse_config(kFlowConfig), {});
  const std::string plot = emit_plot_data(report);
  std::istringstream lines(plot);
  std::string line;
  std::getline(lines, line);  // comment header
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    double t, lhs, rhs, res, lo, hi;
    REQUIRE(std::sscanf(line.c_str(), "%lf %lf %lf %lf %lf %lf", &t, &lhs,
                        &rhs, &res, &lo, &hi) == 6);
    CHECK(lhs - rhs == doctest::Approx(res).epsilon(1e-12));
    CHECK(lo <= hi);
    if (report.pass) {
      CHECK(res >= lo - 1e-12);
      CHECK(res <= hi + 1e-12);
    }
    ++rows;
  }
  CHECK(rows == report.formula.times.size());

  RunReport empty;
  CHECK_THROWS_AS(emit_plot_data(empty), std::invalid_argument);
}

TEST_CASE("seed overrides flow into the run") {
  RunOptions options;
  options.seed = 99;
  const auto report = run(parse_config(kFlowConfig), options);
  CHECK(report.config.ensemble.seed == 99);
}
