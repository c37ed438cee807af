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

#include "ntx/ntx.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "ntx/error.hpp"
#include "ntx/io.hpp"
#include "ntx/reference.hpp"
#include "ntx/report.hpp"

struct ntx_sim {
    ntx::ClusterConfig cfg;
};

struct ntx_result {
    ntx::KernelRun run;
    ntx::ClusterConfig cfg;
    ntx::KernelInputs inputs;
    std::vector<uint64_t> shape;
};

struct ntx_array {
    ntx::NdArray array;
    std::vector<float> values;
};

namespace {

thread_local std::string g_last_error;

ntx_status to_status(ntx::ErrorCode code) {
    switch (code) {
    case ntx::ErrorCode::InvalidArgument:
        return NTX_ERR_INVALID_ARGUMENT;
    case ntx::ErrorCode::BusError:
        return NTX_ERR_BUS;
    case ntx::ErrorCode::DecodeError:
        return NTX_ERR_DECODE;
    case ntx::ErrorCode::AddressFault:
        return NTX_ERR_ADDRESS_FAULT;
    case ntx::ErrorCode::PlanningError:
        return NTX_ERR_PLANNING;
    case ntx::ErrorCode::IoError:
        return NTX_ERR_IO;
    }
    return NTX_ERR_INTERNAL;
}

template <class F>
ntx_status guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return NTX_OK;
    } catch (const ntx::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = std::string("JSON: ") + e.what();
        return NTX_ERR_INVALID_ARGUMENT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return NTX_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return NTX_ERR_INTERNAL;
    }
}

void require(bool ok, const char* what) {
    if (!ok) {
        ntx::fail(ntx::ErrorCode::InvalidArgument, what);
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

ntx::KernelSpec parse_kernel(const char* kernel_json) {
    require(kernel_json != nullptr, "kernel_json is null");
    return ntx::kernel_spec_from_json(nlohmann::json::parse(kernel_json));
}

ntx_status finish_run(ntx_sim* sim, const ntx::KernelSpec& spec, ntx::KernelInputs inputs, ntx_result** out) {
    return guarded([&] {
        auto r = std::make_unique<ntx_result>();
        r->cfg = sim->cfg;
        r->run = ntx::run_kernel(spec, sim->cfg, inputs);
        r->inputs = std::move(inputs);
        r->shape = ntx::kernel_output_shape(spec);
        *out = r.release();
    });
}

}  // namespace

extern "C" {

const char* ntx_version(void) { return "0.1.0"; }

const char* ntx_status_name(ntx_status status) {
    switch (status) {
    case NTX_OK:
        return "ok";
    case NTX_ERR_INTERNAL:
        return "internal_error";
    default:
        return ntx::error_code_name(static_cast<ntx::ErrorCode>(status));
    }
}

const char* ntx_last_error(void) { return g_last_error.c_str(); }

void ntx_string_free(char* s) { std::free(s); }

ntx_status ntx_sim_create(const char* config_json, ntx_sim** out) {
    return guarded([&] {
        require(out != nullptr, "out is null");
        auto sim = std::make_unique<ntx_sim>();
        if (config_json != nullptr && config_json[0] != '\0') {
            sim->cfg = ntx::cluster_config_from_json(nlohmann::json::parse(config_json));
        }
        sim->cfg.validate();
        *out = sim.release();
    });
}

void ntx_sim_destroy(ntx_sim* sim) { delete sim; }

ntx_status ntx_sim_config_json(const ntx_sim* sim, char** out) {
    return guarded([&] {
        require(sim != nullptr && out != nullptr, "null argument");
        *out = dup_string(ntx::cluster_config_to_json(sim->cfg).dump(2));
    });
}

ntx_status ntx_sim_run_kernel(ntx_sim* sim, const char* kernel_json, uint64_t seed, int normal_inputs,
                              ntx_result** out) {
    ntx::KernelSpec spec;
    ntx::KernelInputs inputs;
    const ntx_status st = guarded([&] {
        require(sim != nullptr && out != nullptr, "null argument");
        spec = parse_kernel(kernel_json);
        inputs = ntx::make_inputs(spec, seed, normal_inputs != 0);
    });
    return st != NTX_OK ? st : finish_run(sim, spec, std::move(inputs), out);
}

ntx_status ntx_sim_run_kernel_inputs(ntx_sim* sim, const char* kernel_json, size_t count, const char* const* names,
                                     const float* const* data, const uint64_t* lengths, ntx_result** out) {
    ntx::KernelSpec spec;
    ntx::KernelInputs inputs;
    const ntx_status st = guarded([&] {
        require(sim != nullptr && out != nullptr, "null argument");
        require(count == 0 || (names != nullptr && data != nullptr && lengths != nullptr), "null input arrays");
        spec = parse_kernel(kernel_json);
        for (size_t i = 0; i < count; ++i) {
            require(names[i] != nullptr && (data[i] != nullptr || lengths[i] == 0), "null input entry");
            inputs[names[i]] = std::vector<float>(data[i], data[i] + lengths[i]);
        }
    });
    return st != NTX_OK ? st : finish_run(sim, spec, std::move(inputs), out);
}

ntx_status ntx_kernel_inputs_json(const char* kernel_json, char** out) {
    return guarded([&] {
        require(out != nullptr, "out is null");
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [name, shape] : ntx::kernel_input_shapes(parse_kernel(kernel_json))) {
            j[name] = shape;
        }
        *out = dup_string(j.dump());
    });
}

void ntx_result_destroy(ntx_result* result) { delete result; }

ntx_status ntx_result_report_json(const ntx_result* result, char** out) {
    return guarded([&] {
        require(result != nullptr && out != nullptr, "null argument");
        *out = dup_string(ntx::kernel_report_json(result->run, result->cfg).dump(2));
    });
}

ntx_status ntx_result_roofline_json(const ntx_result* result, char** out) {
    return guarded([&] {
        require(result != nullptr && out != nullptr, "null argument");
        const auto p = ntx::roofline_point(result->run.lowered.spec.label(), result->run.report, result->cfg);
        *out = dup_string(ntx::roofline_point_json(p).dump());
    });
}

ntx_status ntx_result_trace_jsonl(const ntx_result* result, char** out) {
    return guarded([&] {
        require(result != nullptr && out != nullptr, "null argument");
        std::string s;
        for (const ntx::TraceEvent& ev : result->run.trace) {
            s += ntx::trace_event_json(ev);
            s += '\n';
        }
        *out = dup_string(s);
    });
}

ntx_status ntx_result_output(const ntx_result* result, const float** data, uint64_t* count) {
    return guarded([&] {
        require(result != nullptr && data != nullptr && count != nullptr, "null argument");
        *data = result->run.output.data();
        *count = result->run.output.size();
    });
}

ntx_status ntx_result_output_shape(const ntx_result* result, const uint64_t** shape, size_t* ndim) {
    return guarded([&] {
        require(result != nullptr && shape != nullptr && ndim != nullptr, "null argument");
        *shape = result->shape.data();
        *ndim = result->shape.size();
    });
}

ntx_status ntx_result_input(const ntx_result* result, const char* name, const float** data, uint64_t* count) {
    return guarded([&] {
        require(result != nullptr && name != nullptr && data != nullptr && count != nullptr, "null argument");
        const auto it = result->inputs.find(name);
        if (it == result->inputs.end()) {
            ntx::fail(ntx::ErrorCode::InvalidArgument, std::string("no input named '") + name + "'");
        }
        *data = it->second.data();
        *count = it->second.size();
    });
}

ntx_status ntx_result_reference_mismatches(const ntx_result* result, uint64_t* mismatches) {
    return guarded([&] {
        require(result != nullptr && mismatches != nullptr, "null argument");
        const auto ref = ntx::ref::run<ntx::WideAccumulator>(result->run.lowered.spec, result->inputs);
        uint64_t bad = 0;
        for (size_t i = 0; i < ref.size(); ++i) {
            if (std::memcmp(&ref[i], &result->run.output[i], 4) != 0) {
                ++bad;
            }
        }
        *mismatches = bad;
    });
}

double ntx_roofline_attainable(const ntx_sim* sim, double oi) {
    return sim == nullptr ? 0.0 : ntx::roofline_attainable(sim->cfg, oi);
}

double ntx_roofline_practical(const ntx_sim* sim, double oi) {
    return sim == nullptr ? 0.0 : ntx::roofline_practical(sim->cfg, oi);
}

ntx_status ntx_roofline_csv(const ntx_sim* sim, double oi_min, double oi_max, int samples, char** out) {
    return guarded([&] {
        require(sim != nullptr && out != nullptr, "null argument");
        require(oi_min > 0.0 && oi_max > oi_min, "need 0 < oi_min < oi_max");
        *out = dup_string(ntx::roof_lines_csv(sim->cfg, oi_min, oi_max, samples));
    });
}

ntx_status ntx_array_save_f32(const char* path, const uint64_t* shape, size_t ndim, const float* data) {
    return guarded([&] {
        require(path != nullptr && (shape != nullptr || ndim == 0), "null argument");
        std::vector<uint64_t> dims(shape, shape + ndim);
        uint64_t n = 1;
        for (uint64_t d : dims) {
            n *= d;
        }
        require(data != nullptr || n == 0, "null data");
        ntx::save_array(path, ntx::NdArray::from_floats(dims, std::vector<float>(data, data + n)));
    });
}

ntx_status ntx_array_load(const char* path, ntx_array** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "null argument");
        auto a = std::make_unique<ntx_array>();
        a->array = ntx::load_array(path);
        a->values = a->array.floats();
        *out = a.release();
    });
}

void ntx_array_destroy(ntx_array* array) { delete array; }

ntx_status ntx_array_data_f32(const ntx_array* array, const float** data, uint64_t* count) {
    return guarded([&] {
        require(array != nullptr && data != nullptr && count != nullptr, "null argument");
        *data = array->values.data();
        *count = array->values.size();
    });
}

ntx_status ntx_array_shape(const ntx_array* array, const uint64_t** shape, size_t* ndim) {
    return guarded([&] {
        require(array != nullptr && shape != nullptr && ndim != nullptr, "null argument");
        *shape = array->array.shape.data();
        *ndim = array->array.shape.size();
    });
}

}  // extern "C"
