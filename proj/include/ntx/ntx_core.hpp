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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ntx/f32.hpp"
#include "ntx/loops_agu.hpp"
#include "ntx/tcdm.hpp"
#include "ntx/wide_fpu.hpp"

namespace ntx {

enum class InitSource : uint8_t {
    Zero = 0,
    Immediate = 1,  // INIT_VALUE register
    Memory = 2,     // word at the AGU2 address of the scope's first point
};

struct NtxCommand {
    FpuOpcode opcode = FpuOpcode::Mac;
    std::array<uint32_t, kLoopLevels> counts{1, 1, 1, 1, 1};  // iteration counts N
    int outer_level = 0;
    int init_level = 0;
    int store_level = 0;
    std::array<AguConfig, kAguCount> agu{};
    InitSource init_source = InitSource::Zero;
    F32 init_value{};
    F32 alu_reg{};

    HwLoopConfig loops() const;
    /// Throws DecodeError when the levels or loop counts are inconsistent.
    void validate() const;

    uint64_t points() const { return loops().iterations(); }
    uint64_t reads() const;   // operand reads, excluding accumulator seeds
    uint64_t writes() const;
    uint64_t flops() const { return points() * static_cast<uint64_t>(flops_per_element(opcode)); }
};

/// Register offsets in bytes from an NTX block base.
namespace reg {
inline constexpr uint32_t kLoopCount = 0x00;  // + 4 * level, holds N - 1
inline constexpr uint32_t kAgu0Base = 0x20;
inline constexpr uint32_t kAgu1Base = 0x40;
inline constexpr uint32_t kAgu2Base = 0x60;
inline constexpr uint32_t kAguBlock = 0x20;   // distance between AGU register blocks
inline constexpr uint32_t kAguStride = 0x04;  // + 4 * level within an AGU block
inline constexpr uint32_t kLevels = 0x80;     // outer[2:0] init[6:4] store[10:8]
inline constexpr uint32_t kInitValue = 0x84;
inline constexpr uint32_t kAluReg = 0x88;
inline constexpr uint32_t kStatus = 0x8C;     // read only, bit 0 busy
inline constexpr uint32_t kCommand = 0x90;    // opcode[7:0] init_source[9:8], write issues
inline constexpr uint32_t kBlockBytes = 0x94;

constexpr uint32_t loop_count(int level) { return kLoopCount + 4u * static_cast<uint32_t>(level); }
constexpr uint32_t agu_base(int agu) { return kAgu0Base + kAguBlock * static_cast<uint32_t>(agu); }
constexpr uint32_t agu_stride(int agu, int level) {
    return agu_base(agu) + kAguStride + 4u * static_cast<uint32_t>(level);
}
bool is_defined(uint32_t offset);
bool is_writable(uint32_t offset);
std::string name(uint32_t offset);
}  // namespace reg

using RegisterWrite = std::pair<uint32_t, uint32_t>;  // offset, value

/// Register writes that configure `cmd`, excluding COMMAND. Only the
/// registers that matter for the command are emitted.
std::vector<RegisterWrite> encode_config(const NtxCommand& cmd);
uint32_t encode_command_word(const NtxCommand& cmd);

enum class TraceKind : uint8_t { Read, Write, FpuOp, Stall, CmdStart, CmdEnd, DecodeError };
std::string_view trace_kind_name(TraceKind kind);

enum class StallCause : uint8_t { BankConflict, OperandStarvation, Pipeline, DmaWait };
inline constexpr int kStallCauses = 4;
std::string_view stall_cause_name(StallCause cause);

struct TraceEvent {
    uint64_t cycle = 0;
    uint16_t ntx = 0;
    TraceKind kind = TraceKind::FpuOp;
    std::optional<uint32_t> address;
    std::optional<uint32_t> value;
    std::optional<StallCause> cause;
};

std::string trace_event_json(const TraceEvent& ev);

struct NtxCoreConfig {
    uint32_t fifo_depth = 2;   // operand points buffered ahead of the FPU
    uint32_t fpu_latency = 4;  // cycles from the last element to the reduction write
};

struct NtxStats {
    uint64_t commands = 0;
    uint64_t fpu_ops = 0;
    uint64_t flops = 0;
    uint64_t reads = 0;
    uint64_t seed_reads = 0;
    uint64_t writes = 0;
    uint64_t busy_cycles = 0;
    std::array<uint64_t, kStallCauses> stalls{};
    uint64_t invalid_results = 0;
    uint64_t first_fpu_cycle = UINT64_MAX;
    uint64_t last_fpu_cycle = 0;
};

enum class WriteStatus : uint8_t { Ok, Busy };

class NtxCore {
public:
    static constexpr uint32_t kPorts = 3;

    NtxCore(uint16_t id, const NtxCoreConfig& cfg, const TcdmConfig& tcdm);

    uint16_t id() const { return id_; }
    bool busy() const { return busy_; }

    /// Memory-mapped register access. Undefined offsets raise BusError. A
    /// COMMAND write while busy is refused with WriteStatus::Busy.
    WriteStatus write_register(uint32_t offset, uint32_t value, uint64_t cycle);
    uint32_t read_register(uint32_t offset) const;

    /// Decodes the shadow registers into a command without issuing it.
    NtxCommand decode_shadow(uint32_t command_word) const;

    /// Copies `cmd` into the active slot. Throws DecodeError on an invalid
    /// command and InvalidArgument when busy.
    void issue(const NtxCommand& cmd, uint64_t cycle);
    const NtxCommand& active() const { return active_; }

    /// Cycle protocol: step() consumes/fetches and appends this cycle's
    /// TCDM requests, commit() receives the arbiter's decision for them.
    void step(uint64_t cycle, std::vector<MemRequest>& out);
    void commit(uint64_t cycle, std::span<const MemRequest> requests, std::span<const uint8_t> granted,
                Tcdm& tcdm);

    uint64_t retired_commands() const { return retired_; }
    uint64_t last_retire_cycle() const { return last_retire_cycle_; }
    const NtxStats& stats() const { return stats_; }

    void set_trace(std::vector<TraceEvent>* sink) { trace_ = sink; }

private:
    struct Point {
        uint32_t addr[kAguCount]{};
        uint32_t index = 0;
        bool init = false;
        bool store = false;
        bool need_seed = false;
        uint8_t have = 0;  // bit 0/1 operands, bit 2 seed
        F32 in[2]{};
        F32 seed{};
    };
    struct PendingWrite {
        uint32_t address = 0;
        uint32_t value = 0;
        uint64_t ready = 0;
    };
    enum class Port2 : uint8_t { None, Write, Seed };

    void emit(uint64_t cycle, TraceKind kind, std::optional<uint32_t> addr = {},
              std::optional<uint32_t> value = {}, std::optional<StallCause> cause = {});
    void fetch_point(uint64_t cycle);
    bool try_consume(uint64_t cycle);
    bool write_pending_to(uint32_t address) const;
    Point& ring_at(uint64_t seq) { return ring_[seq % ring_.size()]; }
    void retire(uint64_t cycle);

    uint16_t id_;
    NtxCoreConfig cfg_;
    TcdmConfig tcdm_cfg_;
    std::array<uint32_t, reg::kBlockBytes / 4> shadow_{};
    NtxCommand active_;
    bool busy_ = false;
    uint64_t start_cycle_ = 0;

    // execution state of the active command
    int arity_ = 0;
    bool reduction_ = false;
    HwLoopConfig loops_;
    LoopState loop_state_;
    std::array<AguState, kAguCount> agu_state_{};
    bool next_is_init_ = true;
    uint32_t scope_index_ = 0;
    bool fetch_done_ = false;
    uint64_t fetched_ = 0;
    uint64_t consumed_ = 0;
    uint64_t next_req_[2]{};
    uint64_t next_seed_ = 0;
    std::vector<Point> ring_;
    std::vector<PendingWrite> wq_;  // ring buffer
    size_t wq_head_ = 0;
    size_t wq_size_ = 0;
    WideAccumulator acc_;
    FpuSidePath side_;

    // requests issued this cycle, by port
    Port2 port2_kind_ = Port2::None;
    uint64_t issued_seq_[kPorts]{};
    bool issued_[kPorts]{};
    bool deferred_last_ = false;

    uint64_t retired_ = 0;
    uint64_t last_retire_cycle_ = 0;
    NtxStats stats_;
    std::vector<TraceEvent>* trace_ = nullptr;
};

}  // namespace ntx
