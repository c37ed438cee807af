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

#include "ntx/ntx_core.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "ntx/error.hpp"

namespace ntx {

HwLoopConfig NtxCommand::loops() const {
    HwLoopConfig cfg;
    for (int i = 0; i < kLoopLevels; ++i) {
        cfg.enabled[i] = i <= outer_level;
        cfg.counts[i] = counts[i];
    }
    return cfg;
}

void NtxCommand::validate() const {
    if (outer_level < 0 || outer_level >= kLoopLevels) {
        fail(ErrorCode::DecodeError, "outer level " + std::to_string(outer_level) + " outside 0..4");
    }
    if (init_level < 0 || init_level > outer_level || store_level < 0 || store_level > outer_level) {
        fail(ErrorCode::DecodeError, "init/store level outside the enabled loop nest");
    }
    if (store_level > init_level) {
        fail(ErrorCode::DecodeError, "store level " + std::to_string(store_level) +
                                         " exceeds init level " + std::to_string(init_level));
    }
    if (static_cast<int>(opcode) >= kOpcodeCount) {
        fail(ErrorCode::DecodeError, "undefined opcode");
    }
    if (!is_reduction(opcode) && init_source == InitSource::Memory) {
        fail(ErrorCode::DecodeError, "memory seeding requires a reduction opcode");
    }
    if (static_cast<int>(init_source) > 2) {
        fail(ErrorCode::DecodeError, "undefined init source");
    }
    for (int i = 0; i <= outer_level; ++i) {
        if (counts[i] < 1 || counts[i] > kMaxLoopCount) {
            fail(ErrorCode::DecodeError, "loop " + std::to_string(i) + " count outside [1, 65536]");
        }
    }
}

uint64_t NtxCommand::reads() const { return points() * static_cast<uint64_t>(read_arity(opcode)); }

uint64_t NtxCommand::writes() const {
    if (!is_reduction(opcode)) {
        return points();
    }
    uint64_t n = 1;
    for (int i = store_level + 1; i <= outer_level; ++i) {
        n *= counts[i];
    }
    return n;
}

namespace reg {

bool is_defined(uint32_t offset) {
    if (offset % 4 != 0 || offset >= kBlockBytes) {
        return false;
    }
    if (offset < kAgu0Base) {
        return offset <= loop_count(kLoopLevels - 1);
    }
    if (offset < kLevels) {
        return (offset - kAgu0Base) % kAguBlock <= kAguStride + 4 * (kLoopLevels - 1);
    }
    return true;
}

bool is_writable(uint32_t offset) { return is_defined(offset) && offset != kStatus; }

std::string name(uint32_t offset) {
    if (!is_defined(offset)) {
        return "UNDEFINED";
    }
    if (offset < kAgu0Base) {
        return "LOOP_COUNT" + std::to_string(offset / 4);
    }
    if (offset < kLevels) {
        const uint32_t agu = (offset - kAgu0Base) / kAguBlock;
        const uint32_t rel = (offset - kAgu0Base) % kAguBlock;
        const std::string prefix = "AGU" + std::to_string(agu);
        return rel == 0 ? prefix + "_BASE" : prefix + "_STRIDE" + std::to_string((rel - kAguStride) / 4);
    }
    switch (offset) {
    case kLevels:
        return "LEVELS";
    case kInitValue:
        return "INIT_VALUE";
    case kAluReg:
        return "ALU_REG";
    case kStatus:
        return "STATUS";
    default:
        return "COMMAND";
    }
}

}  // namespace reg

namespace {

bool uses_alu_reg(FpuOpcode op) { return op == FpuOpcode::ThresholdMask || op == FpuOpcode::Fill; }

}  // namespace

std::vector<RegisterWrite> encode_config(const NtxCommand& cmd) {
    std::vector<RegisterWrite> out;
    const int outer = cmd.outer_level;
    for (int i = 0; i <= outer; ++i) {
        out.emplace_back(reg::loop_count(i), cmd.counts[i] - 1);
    }
    const int arity = read_arity(cmd.opcode);
    for (int a = 0; a < kAguCount; ++a) {
        if (a < 2 && a >= arity) {
            continue;
        }
        out.emplace_back(reg::agu_base(a), cmd.agu[a].base);
        for (int i = 0; i <= outer; ++i) {
            out.emplace_back(reg::agu_stride(a, i), static_cast<uint32_t>(cmd.agu[a].strides[i]));
        }
    }
    out.emplace_back(reg::kLevels, static_cast<uint32_t>(cmd.outer_level) |
                                       (static_cast<uint32_t>(cmd.init_level) << 4) |
                                       (static_cast<uint32_t>(cmd.store_level) << 8));
    if (cmd.init_source == InitSource::Immediate) {
        out.emplace_back(reg::kInitValue, cmd.init_value.bits);
    }
    if (uses_alu_reg(cmd.opcode)) {
        out.emplace_back(reg::kAluReg, cmd.alu_reg.bits);
    }
    return out;
}

uint32_t encode_command_word(const NtxCommand& cmd) {
    return static_cast<uint32_t>(cmd.opcode) | (static_cast<uint32_t>(cmd.init_source) << 8);
}

std::string_view trace_kind_name(TraceKind kind) {
    switch (kind) {
    case TraceKind::Read:
        return "READ";
    case TraceKind::Write:
        return "WRITE";
    case TraceKind::FpuOp:
        return "FPU_OP";
    case TraceKind::Stall:
        return "STALL";
    case TraceKind::CmdStart:
        return "CMD_START";
    case TraceKind::CmdEnd:
        return "CMD_END";
    case TraceKind::DecodeError:
        return "DECODE_ERROR";
    }
    return "UNKNOWN";
}

std::string_view stall_cause_name(StallCause cause) {
    switch (cause) {
    case StallCause::BankConflict:
        return "bank_conflict";
    case StallCause::OperandStarvation:
        return "operand_starvation";
    case StallCause::Pipeline:
        return "pipeline";
    case StallCause::DmaWait:
        return "dma_wait";
    }
    return "unknown";
}

std::string trace_event_json(const TraceEvent& ev) {
    nlohmann::ordered_json j;
    j["cycle"] = ev.cycle;
    j["ntx"] = ev.ntx;
    j["kind"] = trace_kind_name(ev.kind);
    if (ev.address) {
        j["address"] = *ev.address;
    }
    if (ev.value) {
        j["value"] = *ev.value;
    }
    if (ev.cause) {
        j["cause"] = stall_cause_name(*ev.cause);
    }
    return j.dump();
}

NtxCore::NtxCore(uint16_t id, const NtxCoreConfig& cfg, const TcdmConfig& tcdm)
    : id_(id), cfg_(cfg), tcdm_cfg_(tcdm) {
    if (cfg_.fifo_depth == 0 || cfg_.fifo_depth > 64) {
        fail(ErrorCode::InvalidArgument, "operand FIFO depth must be in [1, 64]");
    }
    if (cfg_.fpu_latency == 0 || cfg_.fpu_latency > 64) {
        fail(ErrorCode::InvalidArgument, "FPU latency must be in [1, 64]");
    }
    ring_.resize(cfg_.fifo_depth);
    wq_.resize(cfg_.fifo_depth + cfg_.fpu_latency + 1);
}

void NtxCore::emit(uint64_t cycle, TraceKind kind, std::optional<uint32_t> addr,
                   std::optional<uint32_t> value, std::optional<StallCause> cause) {
    if (trace_ != nullptr) {
        trace_->push_back(TraceEvent{cycle, id_, kind, addr, value, cause});
    }
}

WriteStatus NtxCore::write_register(uint32_t offset, uint32_t value, uint64_t cycle) {
    if (!reg::is_writable(offset)) {
        std::ostringstream os;
        os << "NTX " << id_ << ": write to " << (reg::is_defined(offset) ? "read-only" : "undefined")
           << " register offset 0x" << std::hex << offset;
        fail(ErrorCode::BusError, os.str());
    }
    if (offset != reg::kCommand) {
        shadow_[offset / 4] = value;
        return WriteStatus::Ok;
    }
    if (busy_) {
        return WriteStatus::Busy;
    }
    shadow_[offset / 4] = value;
    NtxCommand cmd;
    try {
        cmd = decode_shadow(value);
    } catch (const Error&) {
        emit(cycle, TraceKind::DecodeError, std::nullopt, value);
        throw;
    }
    issue(cmd, cycle);
    return WriteStatus::Ok;
}

uint32_t NtxCore::read_register(uint32_t offset) const {
    if (!reg::is_defined(offset)) {
        std::ostringstream os;
        os << "NTX " << id_ << ": read of undefined register offset 0x" << std::hex << offset;
        fail(ErrorCode::BusError, os.str());
    }
    if (offset == reg::kStatus) {
        return busy_ ? 1u : 0u;
    }
    return shadow_[offset / 4];
}

NtxCommand NtxCore::decode_shadow(uint32_t command_word) const {
    NtxCommand cmd;
    const uint32_t op = command_word & 0xFF;
    const uint32_t src = (command_word >> 8) & 0x3;
    if (op >= static_cast<uint32_t>(kOpcodeCount)) {
        fail(ErrorCode::DecodeError, "NTX " + std::to_string(id_) + ": undefined opcode " + std::to_string(op));
    }
    if (src > 2) {
        fail(ErrorCode::DecodeError, "NTX " + std::to_string(id_) + ": undefined init source");
    }
    cmd.opcode = static_cast<FpuOpcode>(op);
    cmd.init_source = static_cast<InitSource>(src);
    const uint32_t levels = shadow_[reg::kLevels / 4];
    cmd.outer_level = static_cast<int>(levels & 0x7);
    cmd.init_level = static_cast<int>((levels >> 4) & 0x7);
    cmd.store_level = static_cast<int>((levels >> 8) & 0x7);
    for (int i = 0; i < kLoopLevels; ++i) {
        const uint32_t v = shadow_[reg::loop_count(i) / 4];
        if (i <= cmd.outer_level && cmd.outer_level < kLoopLevels && v > 0xFFFF) {
            fail(ErrorCode::DecodeError, "NTX " + std::to_string(id_) + ": loop count register " +
                                             std::to_string(i) + " exceeds 16 bits");
        }
        cmd.counts[i] = (v & 0xFFFF) + 1;
    }
    for (int a = 0; a < kAguCount; ++a) {
        cmd.agu[a].base = shadow_[reg::agu_base(a) / 4];
        for (int i = 0; i < kLoopLevels; ++i) {
            cmd.agu[a].strides[i] = static_cast<int32_t>(shadow_[reg::agu_stride(a, i) / 4]);
        }
    }
    cmd.init_value = F32{shadow_[reg::kInitValue / 4]};
    cmd.alu_reg = F32{shadow_[reg::kAluReg / 4]};
    cmd.validate();
    return cmd;
}

void NtxCore::issue(const NtxCommand& cmd, uint64_t cycle) {
    if (busy_) {
        fail(ErrorCode::InvalidArgument, "NTX " + std::to_string(id_) + " is busy");
    }
    try {
        cmd.validate();
    } catch (const Error& e) {
        emit(cycle, TraceKind::DecodeError, std::nullopt, encode_command_word(cmd));
        fail(ErrorCode::DecodeError, "NTX " + std::to_string(id_) + ": " + e.what());
    }
    active_ = cmd;
    arity_ = read_arity(cmd.opcode);
    reduction_ = is_reduction(cmd.opcode);
    loops_ = cmd.loops();
    loop_state_ = LoopState{};
    for (int a = 0; a < kAguCount; ++a) {
        agu_state_[a].address = cmd.agu[a].base;
    }
    next_is_init_ = true;
    scope_index_ = 0;
    fetch_done_ = false;
    fetched_ = consumed_ = 0;
    next_req_[0] = next_req_[1] = 0;
    next_seed_ = 0;
    wq_head_ = wq_size_ = 0;
    side_ = FpuSidePath{};
    side_.alu_reg = cmd.alu_reg;
    deferred_last_ = false;
    busy_ = true;
    start_cycle_ = cycle;
    ++stats_.commands;
    emit(cycle, TraceKind::CmdStart, std::nullopt, encode_command_word(cmd));
}

bool NtxCore::write_pending_to(uint32_t address) const {
    for (size_t i = 0; i < wq_size_; ++i) {
        if (wq_[(wq_head_ + i) % wq_.size()].address == address) {
            return true;
        }
    }
    return false;
}

void NtxCore::fetch_point(uint64_t cycle) {
    Point& p = ring_at(fetched_);
    p = Point{};
    for (int a = 0; a < kAguCount; ++a) {
        p.addr[a] = agu_state_[a].address;
    }
    p.init = next_is_init_;
    p.need_seed = reduction_ && p.init && active_.init_source == InitSource::Memory;

    const LoopStep step = loop_step(loops_, loop_state_);
    if (step.done) {
        p.store = true;
        fetch_done_ = true;
    } else {
        p.store = step.incremented_level > active_.store_level;
        next_is_init_ = step.incremented_level > active_.init_level;
    }
    const bool writes = !reduction_ || p.store;
    for (int a = 0; a < kAguCount; ++a) {
        const bool used = a < arity_ || (a == 2 && (writes || p.need_seed));
        if (!used) {
            continue;
        }
        const uint32_t addr = p.addr[a];
        if (addr % 4 != 0 || addr >= tcdm_cfg_.size_bytes) {
            std::ostringstream os;
            os << "NTX " << id_ << " AGU" << a << " produced address 0x" << std::hex << addr << std::dec
               << " outside the TCDM at cycle " << cycle << " (point " << fetched_ << ")";
            fail(ErrorCode::AddressFault, os.str());
        }
    }
    if (!step.done) {
        for (int a = 0; a < kAguCount; ++a) {
            if (a < arity_ || a == 2) {
                agu_step(active_.agu[a], agu_state_[a], step.incremented_level);
            }
        }
    }
    ++fetched_;
}

bool NtxCore::try_consume(uint64_t cycle) {
    if (consumed_ == fetched_) {
        return false;
    }
    Point& p = ring_at(consumed_);
    const uint8_t need = static_cast<uint8_t>(((1u << arity_) - 1u) | (p.need_seed ? 4u : 0u));
    if ((p.have & need) != need) {
        return false;
    }
    const bool produces = !reduction_ || p.store;
    if (produces && wq_size_ == wq_.size()) {
        return false;
    }
    const FpuOpcode op = active_.opcode;
    if (reduction_ && p.init) {
        std::optional<F32> seed;
        if (active_.init_source == InitSource::Immediate) {
            seed = active_.init_value;
        } else if (active_.init_source == InitSource::Memory) {
            seed = p.seed;
        }
        init_element(op, side_, acc_, seed);
        scope_index_ = 0;
    }
    const std::optional<F32> out = execute_element(op, side_, acc_, p.in[0], p.in[1], scope_index_++);
    auto push = [&](uint32_t value, uint64_t ready) {
        wq_[(wq_head_ + wq_size_) % wq_.size()] = PendingWrite{p.addr[2], value, ready};
        ++wq_size_;
    };
    if (reduction_) {
        if (p.store) {
            const F32 r = reduction_result(op, side_, acc_);
            if (op == FpuOpcode::Mac && (acc_.invalid() || acc_.overflow())) {
                ++stats_.invalid_results;
            }
            push(r.bits, cycle + cfg_.fpu_latency);
        }
    } else if (out) {
        push(out->bits, cycle + 1);
    }
    ++stats_.fpu_ops;
    stats_.flops += static_cast<uint64_t>(flops_per_element(op));
    stats_.first_fpu_cycle = std::min(stats_.first_fpu_cycle, cycle);
    stats_.last_fpu_cycle = std::max(stats_.last_fpu_cycle, cycle);
    emit(cycle, TraceKind::FpuOp, p.addr[2]);
    ++consumed_;
    return true;
}

void NtxCore::step(uint64_t cycle, std::vector<MemRequest>& out) {
    issued_[0] = issued_[1] = issued_[2] = false;
    port2_kind_ = Port2::None;
    if (!busy_) {
        return;
    }
    ++stats_.busy_cycles;
    if (!try_consume(cycle)) {
        StallCause cause = StallCause::OperandStarvation;
        if (fetch_done_ && consumed_ == fetched_) {
            cause = StallCause::Pipeline;
        } else if (deferred_last_) {
            cause = StallCause::BankConflict;
        }
        ++stats_.stalls[static_cast<int>(cause)];
        emit(cycle, TraceKind::Stall, std::nullopt, std::nullopt, cause);
    }
    if (!fetch_done_ && fetched_ - consumed_ < ring_.size()) {
        fetch_point(cycle);
    }
    const uint16_t rq = static_cast<uint16_t>(id_ * kPorts);
    for (int s = 0; s < arity_; ++s) {
        if (next_req_[s] < fetched_) {
            MemRequest r;
            r.requester = static_cast<uint16_t>(rq + s);
            r.kind = MemKind::Read;
            r.address = ring_at(next_req_[s]).addr[s];
            out.push_back(r);
            issued_[s] = true;
        }
    }
    if (wq_size_ > 0 && wq_[wq_head_].ready <= cycle) {
        MemRequest r;
        r.requester = static_cast<uint16_t>(rq + 2);
        r.kind = MemKind::Write;
        r.address = wq_[wq_head_].address;
        r.value = wq_[wq_head_].value;
        out.push_back(r);
        issued_[2] = true;
        port2_kind_ = Port2::Write;
    } else if (active_.init_source == InitSource::Memory && reduction_) {
        next_seed_ = std::max(next_seed_, consumed_);
        while (next_seed_ < fetched_ && !ring_at(next_seed_).need_seed) {
            ++next_seed_;
        }
        if (next_seed_ < fetched_ && !write_pending_to(ring_at(next_seed_).addr[2])) {
            MemRequest r;
            r.requester = static_cast<uint16_t>(rq + 2);
            r.kind = MemKind::Read;
            r.address = ring_at(next_seed_).addr[2];
            out.push_back(r);
            issued_[2] = true;
            port2_kind_ = Port2::Seed;
        }
    }
}

void NtxCore::commit(uint64_t cycle, std::span<const MemRequest> requests, std::span<const uint8_t> granted,
                     Tcdm& tcdm) {
    if (!busy_) {
        return;
    }
    deferred_last_ = false;
    for (size_t i = 0; i < requests.size(); ++i) {
        const MemRequest& r = requests[i];
        const uint32_t port = r.requester % kPorts;
        if (!granted[i]) {
            deferred_last_ = true;
            continue;
        }
        if (port < 2) {
            Point& p = ring_at(next_req_[port]);
            p.in[port] = tcdm.read(r.address);
            p.have |= static_cast<uint8_t>(1u << port);
            ++next_req_[port];
            ++stats_.reads;
            emit(cycle, TraceKind::Read, r.address, p.in[port].bits);
        } else if (port2_kind_ == Port2::Write) {
            tcdm.write_word(r.address, r.value);
            wq_head_ = (wq_head_ + 1) % wq_.size();
            --wq_size_;
            ++stats_.writes;
            emit(cycle, TraceKind::Write, r.address, r.value);
        } else {
            Point& p = ring_at(next_seed_);
            p.seed = tcdm.read(r.address);
            p.have |= 4u;
            ++next_seed_;
            ++stats_.seed_reads;
            emit(cycle, TraceKind::Read, r.address, p.seed.bits);
        }
    }
    if (fetch_done_ && consumed_ == fetched_ && wq_size_ == 0) {
        retire(cycle);
    }
}

void NtxCore::retire(uint64_t cycle) {
    busy_ = false;
    ++retired_;
    last_retire_cycle_ = cycle;
    emit(cycle, TraceKind::CmdEnd);
}

}  // namespace ntx
