// Copyright 2026 The FHA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the few-shot hypothesis adaptation library.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every fallible call returns an fha_status; on failure fha_last_error()
 * describes the most recent error on the calling thread. Strings returned
 * through char** out-parameters are released with fha_string_free. */

#ifndef FHA_FHA_H_
#define FHA_FHA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(FHA_BUILDING_LIBRARY)
#define FHA_API __attribute__((visibility("default")))
#else
#define FHA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fha_status {
  FHA_OK = 0,
  FHA_ERR_INVALID_ARGUMENT = 1,
  FHA_ERR_PROTOCOL = 2,
  FHA_ERR_INSUFFICIENT_DATA = 3,
  FHA_ERR_FORMAT = 4,
  FHA_ERR_IO = 5,
  FHA_ERR_NUMERICAL = 6,
  FHA_ERR_SHAPE_MISMATCH = 7,
  FHA_ERR_QUALITY_GATE = 8,
  /* Some runs of a batch failed; their error records were kept. */
  FHA_ERR_PARTIAL = 9,
  FHA_ERR_INTERNAL = 10
} fha_status;

typedef struct fha_task fha_task;
typedef struct fha_dataset fha_dataset;
typedef struct fha_model fha_model;

FHA_API const char* fha_version(void);
FHA_API const char* fha_last_error(void);
FHA_API const char* fha_status_name(fha_status status);

/* level: "error", "info" or "debug". */
FHA_API fha_status fha_set_log_level(const char* level);

/* Tasks. spec is a preset name ("rot40", "rot180-c2") or a JSON object. */
FHA_API fha_status fha_task_create(const char* spec, fha_task** out);
FHA_API fha_status fha_task_set_seed(fha_task* task, uint64_t seed);
/* "40", "40deg" or "0.7rad". */
FHA_API fha_status fha_task_set_rotation(fha_task* task, const char* angle);
FHA_API fha_status fha_task_to_json(const fha_task* task, char** out);
FHA_API void fha_task_free(fha_task* task);

/* split: 0 source, 1 target, 2 target test. */
FHA_API fha_status fha_task_generate(const fha_task* task, int split, fha_dataset** out);

/* Datasets (FHD1 files). */
FHA_API fha_status fha_dataset_load(const char* path, fha_dataset** out);
FHA_API fha_status fha_dataset_save(const fha_dataset* ds, const char* path);
FHA_API size_t fha_dataset_size(const fha_dataset* ds);
FHA_API size_t fha_dataset_dim(const fha_dataset* ds);
FHA_API uint32_t fha_dataset_classes(const fha_dataset* ds);
FHA_API uint64_t fha_dataset_checksum(const fha_dataset* ds);
FHA_API void fha_dataset_free(fha_dataset* ds);

/* Source hypotheses. config_json may be NULL for defaults; it takes the
 * fields of the "source" block of a run configuration. */
FHA_API fha_status fha_model_train_source(const fha_dataset* source, const char* config_json, uint64_t seed,
                                          const char* task_name, fha_model** out);
FHA_API fha_status fha_model_save(const fha_model* model, const char* path);
FHA_API fha_status fha_model_load(const char* path, fha_model** out);
FHA_API fha_status fha_model_accuracy(const fha_model* model, const fha_dataset* test, double* out);
FHA_API void fha_model_free(fha_model* model);

/* Checks a run configuration without running anything. */
FHA_API fha_status fha_config_validate(const char* config_json, const char* base_dir);

/* Runs a configuration. results_path overrides the config's output path;
 * jobs > 0 overrides its job count. Returns FHA_ERR_PARTIAL if any run
 * failed. */
FHA_API fha_status fha_run_config(const char* config_json, const char* base_dir, const char* results_path,
                                  size_t jobs, size_t* completed, size_t* failed);

/* format: "table" or "csv". Malformed lines are skipped and counted in
 * *skipped; their descriptions go to *diagnostics (may be NULL). */
FHA_API fha_status fha_summarize(const char* results_path, const char* format, char** out, size_t* skipped,
                                 char** diagnostics);

/* PCA embedding of the model's encoder over labelled datasets, as CSV
 * with header x,y,label,domain. *degenerate is set when the projection
 * fell back to raw coordinates. */
FHA_API fha_status fha_dump_embedding(const fha_model* model, const fha_dataset* const* datasets,
                                      const char* const* domains, size_t count, char** out_csv, int* degenerate);

FHA_API void fha_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* FHA_FHA_H_ */
