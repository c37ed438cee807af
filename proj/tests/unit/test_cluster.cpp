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

#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "ntx/cluster.hpp"
#include "ntx/error.hpp"

namespace ntx {
namespace {

NtxCommand mac_stream(uint32_t n, uint32_t base) {
    NtxCommand cmd;
    cmd.opcode = FpuOpcode::Mac;
    cmd.counts[0] = n;
    cmd.agu[0] = {base, {4}};
    cmd.agu[1] = {base + 8, {4}};
    cmd.agu[2] = {0xFF00 + base / 4, {}};
    return cmd;
}

Program eight_streams(uint32_t n) {
    Program p;
    const NtxCommand cmd = mac_stream(n, 0);
    p.configure(kBroadcast, encode_config(cmd));
    for (int i = 0; i < 8; ++i) {
        p.configure(i, {{reg::agu_base(0), 16u * i}, {reg::agu_base(1), 16u * i + 8}});
    }
    p.issue(kBroadcast, encode_command_word(cmd));
    return p;
}

TEST(Cluster, EmptyProgramReportsZero) {
    Cluster c(ClusterConfig{});
    const PerfReport r = c.run(Program{});
    EXPECT_EQ(r.ntx_cycles, 0u);
    EXPECT_EQ(r.flops, 0u);
    EXPECT_EQ(r.energy_j, 0.0);
    EXPECT_EQ(r.achieved_gflops, 0.0);
}

TEST(Cluster, ConfigValidation) {
    ClusterConfig cfg;
    cfg.n_ntx = 0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.f_cluster_hz = cfg.f_ntx_hz;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    EXPECT_DOUBLE_EQ(cfg.peak_flops(), 20e9);
    EXPECT_DOUBLE_EQ(cfg.memory_bandwidth(), 5e9);
}

TEST(Cluster, RunIsDeterministic) {
    auto once = [] {
        Cluster c(ClusterConfig{});
        for (uint32_t a = 0; a < 0x4000; a += 4) {
            c.tcdm().write(a, F32::from_float(static_cast<float>(a % 97) * 0.125f));
        }
        const PerfReport r = c.run(eight_streams(1000));
        return std::make_pair(r.ntx_cycles, std::vector<uint32_t>(c.tcdm().words().begin(), c.tcdm().words().end()));
    };
    const auto a = once();
    const auto b = once();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(Cluster, ReportIdentities) {
    Cluster c(ClusterConfig{});
    const PerfReport r = c.run(eight_streams(4096));
    const ClusterConfig& cfg = c.config();
    EXPECT_EQ(r.flops, 8u * 2u * 4096u);
    EXPECT_NEAR(r.achieved_gflops, r.flops / (r.ntx_cycles / cfg.f_ntx_hz) * 1e-9, 1e-9);
    EXPECT_NEAR(r.utilization, r.achieved_gflops / 20.0, 1e-12);
    EXPECT_LE(r.achieved_gflops, 20.0 + 1e-9);
    EXPECT_EQ(r.cluster_cycles, (r.ntx_cycles + 1) / 2);
}

TEST(Cluster, FaultCarriesActionIndex) {
    Cluster c(ClusterConfig{});
    Program p;
    p.configure(0, {{0x02, 1}});
    try {
        c.run(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BusError);
        EXPECT_NE(std::string(e.what()).find("action #0"), std::string::npos) << e.what();
    }
}

TEST(Energy, ZeroFlopsZeroEnergy) {
    const EnergyEstimate e = energy_estimate(PerfReport{}, ClusterConfig{});
    EXPECT_EQ(e.energy_j, 0.0);
    EXPECT_EQ(e.power_w, 0.0);
}

TEST(Energy, PeakRateGives186Milliwatts) {
    ClusterConfig cfg;
    PerfReport r;
    r.ntx_cycles = 1'250'000'000;  // one second
    r.flops = 20'000'000'000ULL;
    const EnergyEstimate e = energy_estimate(r, cfg);
    EXPECT_NEAR(e.power_w, 0.186, 1e-12);
    EXPECT_NEAR(e.gflops_per_watt, 107.527, 1e-3);
}

TEST(Energy, HalfUtilizationKeepsEfficiency) {
    ClusterConfig cfg;
    PerfReport full, half;
    full.ntx_cycles = half.ntx_cycles = 1'000'000;
    full.flops = 16'000'000;
    half.flops = 8'000'000;
    const EnergyEstimate a = energy_estimate(full, cfg), b = energy_estimate(half, cfg);
    EXPECT_DOUBLE_EQ(a.gflops_per_watt, b.gflops_per_watt);
    EXPECT_NEAR(b.power_w, a.power_w / 2, 1e-15);
}

TEST(ControllerOverhead, OneCyclePerWrite) {
    ClusterConfig cfg;
    Program p;
    std::vector<RegisterWrite> w;
    for (uint32_t i = 0; i < 10; ++i) {
        w.push_back({reg::agu_stride(0, 0), i});
    }
    p.configure(0, w);
    EXPECT_EQ(controller_overhead_model(p, cfg), 10u);

    Program b;
    b.configure(kBroadcast, {{reg::agu_stride(0, 0), 4}});
    EXPECT_EQ(controller_overhead_model(b, cfg), 1u);
}

TEST(ControllerOverhead, ChargedOnTheCriticalPath) {
    Cluster c(ClusterConfig{});
    Program p;
    std::vector<RegisterWrite> w(10, {reg::agu_stride(0, 0), 4});
    p.configure(0, w);
    const PerfReport r = c.run(p);
    EXPECT_EQ(r.controller_cluster_cycles, 10u);
    EXPECT_EQ(r.ntx_cycles, 20u);
}

TEST(ControllerOverhead, ConfigureWhileBusyOverlaps) {
    // the second configuration is written while the first command runs
    Program serial;
    const NtxCommand cmd = mac_stream(2000, 0);
    serial.configure(0, encode_config(cmd));
    serial.issue(0, encode_command_word(cmd));
    Program overlapped = serial;
    overlapped.configure(0, encode_config(mac_stream(2000, 0x100)));

    Cluster a(ClusterConfig{}), b(ClusterConfig{});
    const PerfReport ra = a.run(serial);
    const PerfReport rb = b.run(overlapped);
    EXPECT_EQ(ra.ntx_cycles, rb.ntx_cycles);
}

TEST(Cluster, UnstalledMacStreamsApproachPeak) {
    Cluster c(ClusterConfig{});
    const PerfReport r = c.run(eight_streams(12000));
    EXPECT_GT(r.steady_state_gflops, 19.9);
    EXPECT_LE(r.steady_state_gflops, 20.0 + 1e-9);
}

}  // namespace
}  // namespace ntx
