/*
 * Copyright 2026 The ntxsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the ntxsim cluster simulator.
 *
 * Handles are opaque. Every call that can fail returns an ntx_status; the
 * message for the most recent failure on the calling thread is available
 * from ntx_last_error(). Strings returned through char** out-parameters are
 * owned by the caller and released with ntx_string_free().
 */

#ifndef NTX_NTX_H
#define NTX_NTX_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NTX_API __declspec(dllexport)
#else
#define NTX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ntx_status {
    NTX_OK = 0,
    NTX_ERR_INVALID_ARGUMENT = 1,
    NTX_ERR_BUS = 2,
    NTX_ERR_DECODE = 3,
    NTX_ERR_ADDRESS_FAULT = 4,
    NTX_ERR_PLANNING = 5,
    NTX_ERR_IO = 6,
    NTX_ERR_INTERNAL = 7
} ntx_status;

typedef struct ntx_sim ntx_sim;
typedef struct ntx_result ntx_result;
typedef struct ntx_array ntx_array;

NTX_API const char* ntx_version(void);
NTX_API const char* ntx_status_name(ntx_status status);
NTX_API const char* ntx_last_error(void);
NTX_API void ntx_string_free(char* s);

/* config_json may be NULL or "" for the default cluster. */
NTX_API ntx_status ntx_sim_create(const char* config_json, ntx_sim** out);
NTX_API void ntx_sim_destroy(ntx_sim* sim);
NTX_API ntx_status ntx_sim_config_json(const ntx_sim* sim, char** out);

/* Runs one kernel on fresh memory with inputs drawn from the seeded
 * generator: uniform in [-1, 1) or, with normal_inputs != 0, N(0, 1). */
NTX_API ntx_status ntx_sim_run_kernel(ntx_sim* sim, const char* kernel_json, uint64_t seed, int normal_inputs,
                                      ntx_result** out);

/* Same with caller-provided inputs, matched by name ("x", "A", "u", ...). */
NTX_API ntx_status ntx_sim_run_kernel_inputs(ntx_sim* sim, const char* kernel_json, size_t count,
                                             const char* const* names, const float* const* data,
                                             const uint64_t* lengths, ntx_result** out);

/* Input names and shapes for a kernel, as a JSON object name -> shape. */
NTX_API ntx_status ntx_kernel_inputs_json(const char* kernel_json, char** out);

NTX_API void ntx_result_destroy(ntx_result* result);
NTX_API ntx_status ntx_result_report_json(const ntx_result* result, char** out);
NTX_API ntx_status ntx_result_roofline_json(const ntx_result* result, char** out);
NTX_API ntx_status ntx_result_trace_jsonl(const ntx_result* result, char** out);
/* The pointers stay valid until the result is destroyed. */
NTX_API ntx_status ntx_result_output(const ntx_result* result, const float** data, uint64_t* count);
NTX_API ntx_status ntx_result_output_shape(const ntx_result* result, const uint64_t** shape, size_t* ndim);
/* Input arrays the run consumed, by name. */
NTX_API ntx_status ntx_result_input(const ntx_result* result, const char* name, const float** data, uint64_t* count);
/* Elements whose bits differ from the exact-accumulation scalar reference. */
NTX_API ntx_status ntx_result_reference_mismatches(const ntx_result* result, uint64_t* mismatches);

/* Roofline bounds in Gflop/s for the simulator's configuration. */
NTX_API double ntx_roofline_attainable(const ntx_sim* sim, double oi);
NTX_API double ntx_roofline_practical(const ntx_sim* sim, double oi);
/* Roof samples as CSV over [oi_min, oi_max]. */
NTX_API ntx_status ntx_roofline_csv(const ntx_sim* sim, double oi_min, double oi_max, int samples, char** out);

/* Array container files ("NTXARR01", binary32 payload). */
NTX_API ntx_status ntx_array_save_f32(const char* path, const uint64_t* shape, size_t ndim, const float* data);
NTX_API ntx_status ntx_array_load(const char* path, ntx_array** out);
NTX_API void ntx_array_destroy(ntx_array* array);
NTX_API ntx_status ntx_array_data_f32(const ntx_array* array, const float** data, uint64_t* count);
NTX_API ntx_status ntx_array_shape(const ntx_array* array, const uint64_t** shape, size_t* ndim);

#ifdef __cplusplus
}
#endif

#endif /* NTX_NTX_H */
