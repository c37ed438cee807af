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

/* Acceptance suite entry point, shipped in libntxsim_validate. */

#ifndef NTX_VALIDATE_H
#define NTX_VALIDATE_H

#include "ntx/ntx.h"

#ifdef __cplusplus
extern "C" {
#endif

/* options_json: NULL or {"only": ["AC1", ...], "seed": 1}. On NTX_OK,
 * *report_json receives a JSON document with one entry per criterion and
 * *all_passed is 1 iff every selected criterion passed. */
NTX_API ntx_status ntx_validate(const char* options_json, char** report_json, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif /* NTX_VALIDATE_H */
