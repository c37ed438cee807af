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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntx/cluster.hpp"
#include "ntx/kernels.hpp"

namespace ntx {

// Array container: "NTXARR01", u32 dtype, u32 ndim, u64 shape[ndim], then the
// row-major payload. All fields little-endian.
inline constexpr char kArrayMagic[9] = "NTXARR01";

enum class DType : uint32_t { F32 = 1, U32 = 2 };

struct NdArray {
    DType dtype = DType::F32;
    std::vector<uint64_t> shape;
    std::vector<uint32_t> bits;  // raw element words

    uint64_t elements() const;
    std::vector<float> floats() const;
    static NdArray from_floats(std::vector<uint64_t> shape, const std::vector<float>& values);
};

std::vector<uint8_t> encode_array(const NdArray& a);
NdArray decode_array(const std::vector<uint8_t>& bytes);
void save_array(const std::string& path, const NdArray& a);
NdArray load_array(const std::string& path);

// JSON configuration. Missing keys keep their defaults; unknown keys are errors.
ClusterConfig cluster_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json cluster_config_to_json(const ClusterConfig& cfg);
KernelSpec kernel_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json kernel_spec_to_json(const KernelSpec& spec);

nlohmann::json load_json_file(const std::string& path);

}  // namespace ntx
