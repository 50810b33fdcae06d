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
#include "itoflow.h"

#include <fstream>
#include <sstream>
#include <string>

#include "itoflow/config.hpp"

struct itoflow_run {
  itoflow::RunReport report;
};

namespace {

thread_local std::string g_last_error;

itoflow_status fail(itoflow_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

itoflow_status run_impl(const std::string& config_json, const char* out_dir,
                        int64_t seed_override, int n_threads,
                        itoflow_run** out_run) {
  if (!out_run) return fail(ITOFLOW_ERR_USAGE, "out_run is null");
  *out_run = nullptr;
  try {
    const itoflow::ExperimentConfig cfg = itoflow::parse_config(config_json);
    itoflow::RunOptions options;
    if (out_dir) options.out_dir = out_dir;
    if (seed_override >= 0) {
      options.seed = static_cast<std::uint64_t>(seed_override);
    }
    options.n_threads = n_threads < 1 ? 1 : n_threads;
    auto* handle = new itoflow_run{itoflow::run(cfg, options)};
    *out_run = handle;
    g_last_error.clear();
    if (!handle->report.pass) {
      g_last_error = "one or more checks failed";
      return ITOFLOW_ERR_NUMERIC;
    }
    return ITOFLOW_OK;
  } catch (const itoflow::CapacityError& e) {
    return fail(ITOFLOW_ERR_CAPACITY, e.what());
  } catch (const itoflow::NumericError& e) {
    return fail(ITOFLOW_ERR_NUMERIC, e.what());
  } catch (const itoflow::IndependenceError& e) {
    return fail(ITOFLOW_ERR_USAGE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(ITOFLOW_ERR_USAGE, e.what());
  } catch (const std::exception& e) {
    return fail(ITOFLOW_ERR_USAGE, e.what());
  }
}

}  // namespace

extern "C" {

itoflow_status itoflow_run_text(const char* config_json, const char* out_dir,
                                int64_t seed_override, int n_threads,
                                itoflow_run** out_run) {
  if (!config_json) return fail(ITOFLOW_ERR_USAGE, "config_json is null");
  return run_impl(config_json, out_dir, seed_override, n_threads, out_run);
}

itoflow_status itoflow_run_file(const char* config_path, const char* out_dir,
                                int64_t seed_override, int n_threads,
                                itoflow_run** out_run) {
  if (!config_path) return fail(ITOFLOW_ERR_USAGE, "config_path is null");
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    return fail(ITOFLOW_ERR_USAGE,
                std::string("cannot open config file '") + config_path + "'");
  }
  std::ostringstream text;
  text << in.rdbuf();
  return run_impl(text.str(), out_dir, seed_override, n_threads, out_run);
}

int itoflow_run_passed(const itoflow_run* run) {
  return run && run->report.pass ? 1 : 0;
}

const char* itoflow_run_summary(const itoflow_run* run) {
  return run ? run->report.summary_json.c_str() : "";
}

const char* itoflow_run_csv(const itoflow_run* run) {
  return run ? run->report.csv.c_str() : "";
}

void itoflow_run_free(itoflow_run* run) { delete run; }

const char* itoflow_last_error(void) { return g_last_error.c_str(); }

const char* itoflow_version(void) { return "1.0.0"; }

}  // extern "C"
