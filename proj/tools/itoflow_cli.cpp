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
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "itoflow.h"

namespace {

int to_exit_code(itoflow_status status) {
  switch (status) {
    case ITOFLOW_OK:
      return 0;
    case ITOFLOW_ERR_NUMERIC:
      return 2;
    default:
      return 1;  // usage, I/O, capacity
  }
}

int run_one(const std::string& label, bool from_file, const std::string& src,
            const std::string& out_dir, std::int64_t seed, int threads,
            bool print_summary) {
  itoflow_run* run = nullptr;
  const char* out = out_dir.empty() ? nullptr : out_dir.c_str();
  const itoflow_status status =
      from_file ? itoflow_run_file(src.c_str(), out, seed, threads, &run)
                : itoflow_run_text(src.c_str(), out, seed, threads, &run);
  if (!run) {
    std::fprintf(stderr, "%s: error: %s\n", label.c_str(),
                 itoflow_last_error());
    return to_exit_code(status);
  }
  if (print_summary) std::printf("%s\n", itoflow_run_summary(run));
  std::printf("%s: %s\n", label.c_str(),
              itoflow_run_passed(run) ? "pass" : "FAIL");
  itoflow_run_free(run);
  return to_exit_code(status);
}

std::string default_out_dir() {
  const char* env = std::getenv("ITOFLOW_OUT_DIR");
  return env ? env : "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo verification of measure-flow calculus identities"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = default_out_dir();
  std::int64_t seed = -1;
  int threads = 1;
  bool quiet = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir,
                    "Output directory (default: $ITOFLOW_OUT_DIR)");
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--threads", threads, "Worker thread count")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--quiet", quiet, "Suppress the JSON summary");
  };

  auto* verify = app.add_subcommand("verify", "Run one experiment config");
  verify->add_option("config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  add_common(verify);

  auto* diagnose =
      app.add_subcommand("diagnose", "Run the built-in inequality battery");
  add_common(diagnose);

  auto* sweep =
      app.add_subcommand("sweep", "Run a convergence-study config");
  sweep->add_option("config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  add_common(sweep);

  CLI11_PARSE(app, argc, argv);

  if (verify->parsed() || sweep->parsed()) {
    return run_one(verify->parsed() ? "verify" : "sweep", true, config_path,
                   out_dir, seed, threads, !quiet);
  }

  // diagnose: fixed battery of self-contained checks.
  struct Item {
    const char* name;
    const char* config;
  };
  const std::vector<Item> battery = {
      {"density_integrability",
       R"({"scenario":"diagnostic","diagnostic":"density_integrability",
           "model":{"dim":1},"grid":{"horizon":1.0,"n_steps":1},
           "param_k":2.0})"},
      {"joint_integrability",
       R"({"scenario":"diagnostic","diagnostic":"joint_integrability",
           "model":{"dim":1},"grid":{"horizon":1.0,"n_steps":1},
           "param_k":4.0,"param_alpha":1.0})"},
      {"contraction",
       R"({"scenario":"diagnostic","diagnostic":"contraction",
           "model":{"dim":2},"ensemble":{"seed":11}})"},
      {"mollify",
       R"({"scenario":"diagnostic","diagnostic":"mollify",
           "model":{"dim":1},"ensemble":{"seed":12}})"},
      {"lp_convolution",
       R"({"scenario":"diagnostic","diagnostic":"lp_convolution",
           "model":{"dim":1},"param_p":2.0})"},
      {"krylov",
       R"({"scenario":"diagnostic","diagnostic":"krylov",
           "model":{"preset":"ou","dim":1},
           "grid":{"horizon":1.0,"n_steps":200},
           "ensemble":{"n_paths":4000,"seed":13},"param_p":1.0})"},
  };
  int worst = 0;
  for (const auto& item : battery) {
    std::string item_out;
    if (!out_dir.empty()) item_out = out_dir + "/" + item.name;
    const int code = run_one(item.name, false, item.config, item_out, seed,
                             threads, !quiet);
    if (code > worst) worst = code;
  }
  return worst;
}
