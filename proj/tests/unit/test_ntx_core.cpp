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

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "exact_oracle.hpp"
#include "ntx/cluster.hpp"
#include "ntx/error.hpp"
#include "ntx/ntx_core.hpp"

namespace ntx {
namespace {

F32 f(float v) { return F32::from_float(v); }

ClusterConfig small_cluster(uint32_t n_ntx = 1) {
    ClusterConfig cfg;
    cfg.n_ntx = n_ntx;
    cfg.trace = true;
    return cfg;
}

NtxCommand nest(FpuOpcode op, std::vector<uint32_t> counts) {
    NtxCommand cmd;
    cmd.opcode = op;
    std::copy(counts.begin(), counts.end(), cmd.counts.begin());
    cmd.outer_level = static_cast<int>(counts.size()) - 1;
    return cmd;
}

void run_one(Cluster& c, int ntx, const NtxCommand& cmd) {
    Program p;
    p.configure(ntx, encode_config(cmd));
    p.issue(ntx, encode_command_word(cmd));
    c.run(p);
}

size_t count_kind(const std::vector<TraceEvent>& tr, TraceKind kind) {
    return static_cast<size_t>(std::count_if(tr.begin(), tr.end(), [&](const TraceEvent& e) { return e.kind == kind; }));
}

TEST(NtxRegisters, StrideReadBack) {
    NtxCore core(0, {}, {});
    core.write_register(reg::agu_stride(1, 3), 0xFFFFFFF0u, 0);
    EXPECT_EQ(core.read_register(reg::agu_stride(1, 3)), 0xFFFFFFF0u);
}

TEST(NtxRegisters, UndefinedOffsetIsBusError) {
    NtxCore core(0, {}, {});
    try {
        core.write_register(0x02, 1, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BusError);
    }
    EXPECT_THROW(core.read_register(reg::kBlockBytes), Error);
    EXPECT_THROW(core.write_register(reg::kStatus, 1, 0), Error);
}

TEST(NtxRegisters, CommandWriteSetsBusy) {
    std::vector<TraceEvent> trace;
    NtxCore core(0, {}, {});
    core.set_trace(&trace);
    const NtxCommand cmd = nest(FpuOpcode::Mac, {4});
    for (const auto& [off, val] : encode_config(cmd)) {
        core.write_register(off, val, 0);
    }
    EXPECT_EQ(core.write_register(reg::kCommand, encode_command_word(cmd), 0), WriteStatus::Ok);
    EXPECT_TRUE(core.busy());
    EXPECT_EQ(core.read_register(reg::kStatus), 1u);
    EXPECT_EQ(count_kind(trace, TraceKind::CmdStart), 1u);
    EXPECT_EQ(core.write_register(reg::kCommand, encode_command_word(cmd), 1), WriteStatus::Busy);
}

TEST(NtxRegisters, ShadowChangesDoNotAffectActive) {
    NtxCore core(0, {}, {});
    NtxCommand cmd = nest(FpuOpcode::Mac, {4});
    cmd.agu[0].strides[0] = 4;
    for (const auto& [off, val] : encode_config(cmd)) {
        core.write_register(off, val, 0);
    }
    core.write_register(reg::kCommand, encode_command_word(cmd), 0);
    core.write_register(reg::agu_stride(0, 0), 8, 1);
    EXPECT_EQ(core.active().agu[0].strides[0], 4);
    EXPECT_EQ(core.read_register(reg::agu_stride(0, 0)), 8u);
}

TEST(NtxRegisters, LoopCountHoldsMaxIndex) {
    NtxCommand cmd = nest(FpuOpcode::Mac, {10, 3});
    NtxCore core(0, {}, {});
    for (const auto& [off, val] : encode_config(cmd)) {
        core.write_register(off, val, 0);
    }
    EXPECT_EQ(core.read_register(reg::loop_count(0)), 9u);
    const NtxCommand back = core.decode_shadow(encode_command_word(cmd));
    EXPECT_EQ(back.counts[0], 10u);
    EXPECT_EQ(back.counts[1], 3u);
    EXPECT_EQ(back.outer_level, 1);
}

TEST(NtxDecode, StoreAboveOuterRejected) {
    std::vector<TraceEvent> trace;
    NtxCore core(0, {}, {});
    core.set_trace(&trace);
    NtxCommand cmd = nest(FpuOpcode::Mac, {4});
    for (const auto& [off, val] : encode_config(cmd)) {
        core.write_register(off, val, 0);
    }
    core.write_register(reg::kLevels, 0u | (0u << 4) | (2u << 8), 0);
    try {
        core.write_register(reg::kCommand, encode_command_word(cmd), 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DecodeError);
    }
    EXPECT_FALSE(core.busy());
    EXPECT_EQ(count_kind(trace, TraceKind::DecodeError), 1u);

    cmd.store_level = 1;
    cmd.init_level = 0;
    cmd.counts[1] = 2;
    cmd.outer_level = 1;
    EXPECT_THROW(cmd.validate(), Error);  // store deeper than init
}

TEST(NtxExecute, DotProduct) {
    Cluster c(small_cluster());
    const float x[] = {1, 2, 3, 4};
    for (uint32_t i = 0; i < 4; ++i) {
        c.tcdm().write(4 * i, f(x[i]));
        c.tcdm().write(0x100 + 4 * i, F32::one());
    }
    NtxCommand cmd = nest(FpuOpcode::Mac, {4});
    cmd.agu[0] = {0, {4}};
    cmd.agu[1] = {0x100, {4}};
    cmd.agu[2] = {0x200, {}};
    run_one(c, 0, cmd);
    EXPECT_EQ(c.tcdm().read(0x200).to_float(), 10.0f);
    EXPECT_EQ(count_kind(c.trace(), TraceKind::Read), 8u);
    EXPECT_EQ(count_kind(c.trace(), TraceKind::Write), 1u);
    EXPECT_EQ(count_kind(c.trace(), TraceKind::FpuOp), 4u);
    EXPECT_EQ(count_kind(c.trace(), TraceKind::CmdEnd), 1u);
}

TEST(NtxExecute, Gemv2x2) {
    Cluster c(small_cluster());
    const float a[] = {1, 2, 3, 4};  // row major
    for (uint32_t i = 0; i < 4; ++i) {
        c.tcdm().write(4 * i, f(a[i]));
    }
    c.tcdm().write(0x100, f(5));
    c.tcdm().write(0x104, f(6));
    NtxCommand cmd = nest(FpuOpcode::Mac, {2, 2});
    cmd.agu[0] = compile_affine(0, std::vector<int64_t>{4, 8}, std::vector<uint32_t>{2, 2});
    cmd.agu[1] = compile_affine(0x100, std::vector<int64_t>{4, 0}, std::vector<uint32_t>{2, 2});
    cmd.agu[2] = compile_affine(0x200, std::vector<int64_t>{0, 4}, std::vector<uint32_t>{2, 2});
    run_one(c, 0, cmd);
    EXPECT_EQ(c.tcdm().read(0x200).to_float(), 17.0f);
    EXPECT_EQ(c.tcdm().read(0x204).to_float(), 39.0f);
    EXPECT_EQ(count_kind(c.trace(), TraceKind::Write), 2u);
    EXPECT_EQ(cmd.writes(), 2u);
}

TEST(NtxExecute, FillWritesWithoutReads) {
    Cluster c(small_cluster());
    NtxCommand cmd = nest(FpuOpcode::Fill, {8});
    cmd.alu_reg = f(-1.5f);
    cmd.agu[2] = {0x40, {4}};
    run_one(c, 0, cmd);
    for (uint32_t i = 0; i < 8; ++i) {
        EXPECT_EQ(c.tcdm().read(0x40 + 4 * i).to_float(), -1.5f);
    }
    EXPECT_EQ(c.tcdm().read(0x60).to_float(), 0.0f);
    EXPECT_EQ(count_kind(c.trace(), TraceKind::Write), 8u);
    EXPECT_EQ(count_kind(c.trace(), TraceKind::Read), 0u);
}

TEST(NtxExecute, OutOfRangeAddressFaults) {
    Cluster c(small_cluster());
    NtxCommand cmd = nest(FpuOpcode::Fill, {8});
    cmd.agu[2] = {65536 - 8, {4}};
    try {
        run_one(c, 0, cmd);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AddressFault);
    }
}

TEST(NtxExecute, BackToBackCommandsSerialize) {
    Cluster c(small_cluster());
    NtxCommand a = nest(FpuOpcode::Fill, {16});
    a.agu[2] = {0, {4}};
    NtxCommand b = a;
    b.agu[2].base = 0x100;
    Program p;
    p.configure(0, encode_config(a));
    p.issue(0, encode_command_word(a));
    p.configure(0, encode_config(b));
    p.issue(0, encode_command_word(b));
    c.run(p);
    std::vector<uint64_t> starts, ends;
    for (const auto& e : c.trace()) {
        if (e.kind == TraceKind::CmdStart) {
            starts.push_back(e.cycle);
        } else if (e.kind == TraceKind::CmdEnd) {
            ends.push_back(e.cycle);
        }
    }
    ASSERT_EQ(starts.size(), 2u);
    ASSERT_EQ(ends.size(), 2u);
    EXPECT_GT(starts[1], ends[0]);
    EXPECT_LE(starts[1], ends[0] + 2);  // next controller edge after the retire
}

TEST(NtxBroadcast, ConfigureAllThenOverrideBase) {
    Cluster c(small_cluster(8));
    NtxCommand cmd = nest(FpuOpcode::Fill, {4});
    cmd.agu[2] = {0, {4}};
    Program p;
    p.configure(kBroadcast, encode_config(cmd));
    for (int i = 0; i < 8; ++i) {
        p.configure(i, {{reg::agu_base(2), 0x100u * static_cast<uint32_t>(i)}});
    }
    p.issue(kBroadcast, encode_command_word(cmd));
    c.run(p);
    for (int i = 0; i < 8; ++i) {
        EXPECT_EQ(c.ntx(i).read_register(reg::agu_stride(2, 0)), 4u);
        EXPECT_EQ(c.ntx(i).read_register(reg::agu_base(2)), 0x100u * i);
    }
    std::vector<uint64_t> starts;
    for (const auto& e : c.trace()) {
        if (e.kind == TraceKind::CmdStart) {
            starts.push_back(e.cycle);
        }
    }
    ASSERT_EQ(starts.size(), 8u);
    EXPECT_TRUE(std::all_of(starts.begin(), starts.end(), [&](uint64_t s) { return s == starts[0]; }));
}

TEST(NtxTrace, CyclesNondecreasingPerNtx) {
    Cluster c(small_cluster(2));
    NtxCommand cmd = nest(FpuOpcode::Mac, {16, 4});
    cmd.agu[0] = {0, {4, 4}};
    cmd.agu[1] = {0x1000, {4, -60}};
    cmd.agu[2] = {0x2000, {0, 4}};
    Program p;
    p.configure(kBroadcast, encode_config(cmd));
    p.issue(kBroadcast, encode_command_word(cmd));
    c.run(p);
    std::map<uint16_t, uint64_t> last;
    for (const auto& e : c.trace()) {
        EXPECT_GE(e.cycle, last[e.ntx]);
        last[e.ntx] = e.cycle;
    }
}

// Scalar model of one command: walks the iteration space in order with
// affine addresses and applies the opcode directly.
std::map<uint32_t, uint32_t> scalar_reference(const NtxCommand& cmd, const std::vector<uint32_t>& mem) {
    std::map<uint32_t, uint32_t> out;
    const int levels = cmd.outer_level + 1;
    std::vector<uint32_t> idx(levels, 0);
    uint32_t addr[3];
    for (int a = 0; a < 3; ++a) {
        addr[a] = cmd.agu[a].base;
    }
    oracle::ExactAccumulator acc;
    float cmp = 0.0f;
    uint32_t cmp_index = 0, scope_pos = 0;
    auto rd = [&](uint32_t a) { return F32::from_bits(mem[a / 4]); };
    while (true) {
        const bool init = std::all_of(idx.begin(), idx.begin() + cmd.init_level + 1, [](uint32_t i) { return i == 0; });
        bool store = true;
        for (int l = 0; l <= cmd.store_level; ++l) {
            store = store && idx[l] + 1 == cmd.counts[l];
        }
        const F32 a = rd(addr[0]), b = rd(addr[1]);
        if (init) {
            acc.init_zero();
            cmp = cmd.opcode == FpuOpcode::Max ? -INFINITY : INFINITY;
            cmp_index = 0;
            scope_pos = 0;
        }
        switch (cmd.opcode) {
        case FpuOpcode::Mac:
            acc.mac(a, b);
            if (store) {
                out[addr[2]] = acc.round().bits;
            }
            break;
        case FpuOpcode::Max:
            if (a.to_float() > cmp) {
                cmp = a.to_float();
                cmp_index = scope_pos;
            }
            if (store) {
                out[addr[2]] = F32::from_float(cmp).bits;
            }
            break;
        case FpuOpcode::Vadd:
            out[addr[2]] = F32::from_float(a.to_float() + b.to_float()).bits;
            break;
        case FpuOpcode::Relu:
            out[addr[2]] = a.to_float() > 0.0f ? a.bits : 0u;
            break;
        case FpuOpcode::Copy:
            out[addr[2]] = a.bits;
            break;
        default:
            break;
        }
        (void)cmp_index;
        ++scope_pos;
        int l = 0;
        while (l < levels && ++idx[l] == cmd.counts[l]) {
            idx[l++] = 0;
        }
        if (l == levels) {
            break;
        }
        for (int k = 0; k < 3; ++k) {
            addr[k] = static_cast<uint32_t>(int64_t{addr[k]} + cmd.agu[k].strides[l]);
        }
    }
    return out;
}

TEST(NtxEquivalence, RandomCommandsMatchScalarModel) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<float> u(-2.0f, 2.0f);
    const FpuOpcode ops[] = {FpuOpcode::Mac, FpuOpcode::Max, FpuOpcode::Vadd, FpuOpcode::Relu, FpuOpcode::Copy};
    for (int trial = 0; trial < 120; ++trial) {
        const FpuOpcode op = ops[trial % 5];
        const int levels = 1 + static_cast<int>(rng() % 4);
        std::vector<uint32_t> counts(levels);
        for (auto& n : counts) {
            n = 1 + static_cast<uint32_t>(rng() % 8);
        }
        NtxCommand cmd = nest(op, counts);
        if (is_reduction(op)) {
            cmd.init_level = static_cast<int>(rng() % levels);
            cmd.store_level = static_cast<int>(rng() % (cmd.init_level + 1));
        }
        // inputs in the lower half, outputs packed densely in the upper half
        std::vector<int64_t> c0(levels), c1(levels), c2(levels);
        int64_t dense = 4;
        for (int l = 0; l < levels; ++l) {
            c0[l] = 4 * static_cast<int64_t>(rng() % 9);
            c1[l] = 4 * static_cast<int64_t>(rng() % 9);
            const bool reduced = is_reduction(op) && l <= cmd.store_level;
            c2[l] = reduced ? 0 : dense;
            dense *= reduced ? 1 : counts[l];
        }
        cmd.agu[0] = compile_affine(0, c0, counts);
        cmd.agu[1] = compile_affine(0x4000, c1, counts);
        cmd.agu[2] = compile_affine(0x8000, c2, counts);

        Cluster c(ClusterConfig{});
        std::vector<uint32_t> image(c.tcdm().config().size_bytes / 4);
        for (uint32_t i = 0; i < 0x8000 / 4; ++i) {
            image[i] = F32::from_float(u(rng)).bits;
            c.tcdm().write_word(4 * i, image[i]);
        }
        run_one(c, static_cast<int>(trial % 8), cmd);
        const auto expect = scalar_reference(cmd, image);
        for (const auto& [addr, bits] : expect) {
            ASSERT_EQ(c.tcdm().read_word(addr), bits) << "trial " << trial << " addr " << addr;
        }
        EXPECT_EQ(c.ntx(trial % 8).stats().writes, cmd.writes());
        EXPECT_EQ(c.ntx(trial % 8).stats().reads, cmd.reads());
    }
}

}  // namespace
}  // namespace ntx
