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

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "ntx/dma.hpp"
#include "ntx/ntx_core.hpp"
#include "ntx/tcdm.hpp"

namespace ntx {

struct ClusterConfig {
    uint32_t n_ntx = 8;
    double f_ntx_hz = 1.25e9;
    double f_cluster_hz = 625e6;
    TcdmConfig tcdm;
    DmaConfig dma;
    NtxCoreConfig ntx;
    double energy_pj_per_flop = 9.3;
    uint32_t dma_setup_cluster_cycles = 4;  // descriptor programming by the controller
    uint64_t max_ntx_cycles = 4'000'000'000ULL;
    bool trace = false;

    void validate() const;
    double peak_flops() const { return 2.0 * n_ntx * f_ntx_hz; }
    double memory_bandwidth() const { return dma.axi_bytes_per_cluster_cycle() * f_cluster_hz; }
};

inline constexpr int kBroadcast = -1;

namespace action {
struct Configure {
    int ntx = kBroadcast;
    std::vector<RegisterWrite> writes;
};
struct Issue {
    int ntx = kBroadcast;
    uint32_t command_word = 0;
};
struct Dma {
    DmaJob job;
    uint32_t tag = 0;
};
struct Barrier {
    std::vector<std::pair<int, uint64_t>> retired;  // NTX id, commands retired at least
    std::vector<uint32_t> dma_tags;
};
struct SwapBuffers {};
}  // namespace action

using Action = std::variant<action::Configure, action::Issue, action::Dma, action::Barrier, action::SwapBuffers>;

std::string_view action_name(const Action& a);

struct Program {
    std::vector<Action> actions;

    void configure(int ntx, std::vector<RegisterWrite> writes) {
        actions.emplace_back(action::Configure{ntx, std::move(writes)});
    }
    void issue(int ntx, uint32_t command_word) { actions.emplace_back(action::Issue{ntx, command_word}); }
    void dma(const DmaJob& job, uint32_t tag) { actions.emplace_back(action::Dma{job, tag}); }
    void barrier(action::Barrier b) { actions.emplace_back(std::move(b)); }
    void swap_buffers() { actions.emplace_back(action::SwapBuffers{}); }
};

/// Cluster cycles the controller spends on register writes and DMA setup.
uint64_t controller_overhead_model(const Program& program, const ClusterConfig& cfg);

struct EnergyEstimate {
    double energy_j = 0.0;
    double power_w = 0.0;
    double gflops_per_watt = 0.0;
};

struct PerfReport {
    uint64_t ntx_cycles = 0;
    uint64_t cluster_cycles = 0;
    uint64_t flops = 0;
    uint64_t fpu_ops = 0;
    uint64_t bytes_in = 0;
    uint64_t bytes_out = 0;
    std::array<uint64_t, kStallCauses> stall_cycles{};
    uint64_t commands = 0;
    uint64_t controller_cluster_cycles = 0;
    uint64_t fpu_window_cycles = 0;  // first to last FPU operation, any NTX

    double achieved_gflops = 0.0;
    double steady_state_gflops = 0.0;
    double peak_gflops = 0.0;
    double operational_intensity = 0.0;  // 0 when no external traffic
    double utilization = 0.0;
    double dma_bandwidth_gbs = 0.0;      // bytes per second while the AXI port was moving data

    uint64_t tcdm_requests = 0;
    uint64_t tcdm_conflicts = 0;
    double conflict_probability = 0.0;
    uint64_t dma_deferrals = 0;

    double energy_j = 0.0;
    double power_w = 0.0;
    double power_at_peak_w = 0.0;
    double gflops_per_watt = 0.0;

    std::vector<std::string> warnings;
};

EnergyEstimate energy_estimate(const PerfReport& report, const ClusterConfig& cfg);

class Cluster {
public:
    explicit Cluster(ClusterConfig cfg);

    const ClusterConfig& config() const { return cfg_; }
    Tcdm& tcdm() { return tcdm_; }
    const Tcdm& tcdm() const { return tcdm_; }
    ExtMemory& ext() { return ext_; }
    const ExtMemory& ext() const { return ext_; }
    NtxCore& ntx(size_t i) { return *ntx_.at(i); }
    const Dma& dma() const { return *dma_; }
    const std::vector<TraceEvent>& trace() const { return trace_; }

    /// Executes the program to completion. Faults are rethrown with the
    /// failing action index and cycle.
    PerfReport run(const Program& program);

private:
    bool controller_step(const Program& program, uint64_t cycle);
    bool all_idle() const;

    ClusterConfig cfg_;
    Tcdm tcdm_;
    ExtMemory ext_;
    std::unique_ptr<Dma> dma_;
    std::vector<std::unique_ptr<NtxCore>> ntx_;
    std::vector<TraceEvent> trace_;

    size_t pc_ = 0;
    uint64_t ctrl_ready_ = 0;
    bool waiting_on_dma_ = false;
    std::map<uint32_t, uint32_t> dma_tags_;  // program tag -> DMA job id
    uint64_t controller_cycles_ = 0;
    bool ran_ = false;
};

}  // namespace ntx
