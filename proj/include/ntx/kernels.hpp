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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ntx/cluster.hpp"

namespace ntx {

enum class KernelKind : uint8_t { Axpy, Gemv, Gemm, Conv2d, Laplace1d, Laplace2d, Laplace3d, Diffusion };

std::string_view kernel_kind_name(KernelKind kind);
std::optional<KernelKind> kernel_kind_from_name(std::string_view name);

/// Shapes follow the kernel: AXPY uses n; GEMV y[m] = A[m][n] x[n]; GEMM
/// C[m][n] += A[m][k] B[k][n]; CONV2D maps in[h][w][c_in] through
/// wt[c_out][ksize][ksize][c_in] to out[h-ksize+1][w-ksize+1][c_out];
/// stencils operate on u[d][h][w] (d = 1 for 2D, h = d = 1 for 1D).
struct KernelSpec {
    KernelKind kind = KernelKind::Axpy;
    uint64_t n = 0;
    uint64_t m = 0;
    uint64_t k = 0;
    uint32_t h = 1;
    uint32_t w = 1;
    uint32_t d = 1;
    uint32_t ksize = 3;
    uint32_t c_in = 1;
    uint32_t c_out = 1;
    float alpha = 2.0f;     // AXPY scale
    float nu = 0.0625f;     // diffusion strength
    // Tiling; 0 lets the planner choose. The planner writes back its choice.
    uint32_t tile_x = 0;
    uint32_t tile_y = 0;
    uint32_t tile_z = 0;
    uint32_t block = 0;     // GEMM output block edge
    uint32_t block_k = 0;   // GEMM reduction block, GEMV column block

    void validate() const;
    std::string label() const;
    uint64_t flops() const;
};

struct ExtArray {
    std::string name;
    uint64_t offset = 0;
    std::vector<uint64_t> shape;

    uint64_t elements() const;
};

struct TileCommand {
    int ntx = 0;
    NtxCommand cmd;
};

struct Tile {
    std::vector<DmaJob> loads;
    std::vector<std::vector<TileCommand>> groups;  // issued in order, one command per NTX at most
    std::vector<DmaJob> stores;                    // legal once the tile's commands retired
};

struct TcdmBuffer {
    std::string name;
    uint32_t offset = 0;  // bytes
    uint32_t words = 0;
};

struct TilingPlan {
    std::vector<Tile> tiles;
    std::vector<TcdmBuffer> buffers;
    uint32_t tcdm_words_used = 0;
    bool memory_bound_order = false;
    uint64_t est_compute_cycles = 0;   // per tile, NTX cycles
    uint64_t est_transfer_cycles = 0;  // per tile, NTX cycles
};

struct LoweredKernel {
    KernelSpec spec;  // with the planner's tiling choices filled in
    TilingPlan plan;
    Program program;
    std::vector<ExtArray> ext_arrays;
    std::map<std::string, std::vector<float>> constants;  // staged by the lowering itself
    std::string output;                                   // name of the result array
    uint64_t ext_bytes = 0;

    const ExtArray& array(const std::string& name) const;
};

/// Plans tiles and builds the double-buffered controller program. Throws
/// PlanningError when a working set cannot fit the TCDM.
LoweredKernel lower(const KernelSpec& spec, const ClusterConfig& cfg);

/// Double-buffered schedule for an arbitrary tile list.
Program build_program(const TilingPlan& plan, const ClusterConfig& cfg);

/// Stencil coefficient taps of each command pass, in execution order.
std::vector<std::vector<float>> stencil_passes(const KernelSpec& spec);

using KernelInputs = std::map<std::string, std::vector<float>>;

/// Names and shapes of the caller-provided arrays.
std::vector<std::pair<std::string, std::vector<uint64_t>>> kernel_input_shapes(const KernelSpec& spec);
std::vector<uint64_t> kernel_output_shape(const KernelSpec& spec);

/// Deterministic pseudo-random fixtures: uniform in [-1, 1) or standard normal.
KernelInputs make_inputs(const KernelSpec& spec, uint64_t seed, bool normal = false);

struct KernelRun {
    LoweredKernel lowered;
    PerfReport report;
    std::vector<float> output;
    double reuse_factor = 0.0;  // MACs per output element and input channel (CONV2D)
    std::vector<TraceEvent> trace;
};

KernelRun run_kernel(const KernelSpec& spec, const ClusterConfig& cfg, const KernelInputs& inputs);

}  // namespace ntx
