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
#ifndef ITOFLOW_H_
#define ITOFLOW_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Stable C interface to the verification library. All functions return an
 * itoflow_status; outputs are delivered through an opaque run handle. */

typedef enum itoflow_status {
  ITOFLOW_OK = 0,
  ITOFLOW_ERR_USAGE = 1,   /* bad config, bad arguments, I/O failures */
  ITOFLOW_ERR_NUMERIC = 2, /* numeric blow-up or hypothesis violation */
  ITOFLOW_ERR_CAPACITY = 3 /* a documented size cap was exceeded */
} itoflow_status;

typedef struct itoflow_run itoflow_run;

/* Parses the JSON config text, executes the experiment, and returns a handle.
 * out_dir may be NULL (no files written). seed_override < 0 keeps the seed
 * from the config. n_threads < 1 is treated as 1. The handle is set on
 * success and on numeric failure (exit semantics live in the passed flag);
 * it stays NULL on usage errors. */
itoflow_status itoflow_run_text(const char* config_json, const char* out_dir,
                                int64_t seed_override, int n_threads,
                                itoflow_run** out_run);

/* Same, reading the config from a file. */
itoflow_status itoflow_run_file(const char* config_path, const char* out_dir,
                                int64_t seed_override, int n_threads,
                                itoflow_run** out_run);

/* 1 if every check in the run passed, 0 otherwise. */
int itoflow_run_passed(const itoflow_run* run);

/* JSON summary of the run; owned by the handle, valid until freed. */
const char* itoflow_run_summary(const itoflow_run* run);

/* Per-time CSV table of the run; owned by the handle. */
const char* itoflow_run_csv(const itoflow_run* run);

void itoflow_run_free(itoflow_run* run);

/* Message of the most recent error on this thread; empty string if none. */
const char* itoflow_last_error(void);

/* Library version string, e.g. "1.0.0". */
const char* itoflow_version(void);

#ifdef __cplusplus
}
#endif

#endif /* ITOFLOW_H_ */
