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
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "ntx/f32.hpp"
#include "ntx/tcdm.hpp"

namespace ntx {

/// Byte-addressable image of the memory outside the cluster.
class ExtMemory {
public:
    ExtMemory() = default;
    explicit ExtMemory(uint64_t size_bytes) : bytes_(size_bytes, 0) {}

    uint64_t size() const { return bytes_.size(); }
    void resize(uint64_t size_bytes) { bytes_.resize(size_bytes, 0); }

    uint32_t read_word(uint64_t address) const;
    void write_word(uint64_t address, uint32_t value);
    F32 read(uint64_t address) const { return F32{read_word(address)}; }
    void write(uint64_t address, F32 value) { write_word(address, value.bits); }

    void write_floats(uint64_t address, std::span<const float> values);
    std::vector<float> read_floats(uint64_t address, size_t count) const;

    std::span<const uint8_t> bytes() const { return bytes_; }
    std::span<uint8_t> bytes() { return bytes_; }

private:
    void check(uint64_t address, uint64_t len) const;
    std::vector<uint8_t> bytes_;
};

enum class DmaDirection : uint8_t { In, Out };  // In: external -> TCDM

/// Two-dimensional transfer: `rows` rows of `width_bytes` each.
struct DmaJob {
    DmaDirection direction = DmaDirection::In;
    uint64_t ext_base = 0;
    uint32_t tcdm_base = 0;
    uint32_t width_bytes = 0;
    uint32_t rows = 1;
    uint64_t ext_stride = 0;
    uint32_t tcdm_stride = 0;

    uint64_t bytes() const { return uint64_t{width_bytes} * rows; }
};

struct DmaConfig {
    uint32_t axi_bits = 64;                // external port width at the cluster clock
    uint32_t ext_latency_ntx_cycles = 100;  // charged when the engine starts from idle
    uint32_t queue_depth = 16;
    uint32_t tcdm_ports = 0;     // 0: twice the port's word rate per NTX cycle, at least 2
    uint32_t staging_bytes = 0;  // 0: max(64, 4 * AXI beat)

    uint32_t axi_bytes_per_cluster_cycle() const { return axi_bits / 8; }
    void validate() const;
};

struct DmaStats {
    uint64_t bytes_in = 0;
    uint64_t bytes_out = 0;
    uint64_t jobs_completed = 0;
    uint64_t busy_cycles = 0;  // NTX cycles with an active job
    uint64_t ext_active_cycles = 0;  // cluster cycles in which the AXI port moved data
    uint64_t tcdm_deferrals = 0;
    uint32_t max_queue_occupancy = 0;
};

struct DmaCompletion {
    uint32_t job_id = 0;
    uint64_t cycle = 0;
};

// Cluster DMA engine. One job is active at a time; further jobs wait in a FIFO.
// The external side moves at most one AXI beat per cluster cycle (every second
// NTX cycle); the TCDM side competes for banks at low priority.
class Dma {
public:
    static constexpr uint16_t kRequesterBase = 960;

    Dma(DmaConfig cfg, Tcdm& tcdm, ExtMemory& ext);

    const DmaConfig& config() const { return cfg_; }
    uint32_t tcdm_ports() const { return ports_; }

    bool can_enqueue() const { return queue_.size() < cfg_.queue_depth; }
    /// Validates the footprint and queues the job; returns its id. Throws
    /// AddressFault for footprints outside either memory.
    uint32_t enqueue(const DmaJob& job, uint64_t cycle = 0);
    bool idle() const { return queue_.empty() && !active_valid_; }
    bool completed(uint32_t id) const { return id < completed_.size() && completed_[id]; }
    size_t queued() const { return queue_.size(); }

    /// First half of an NTX cycle: external beat (on cluster edges) and TCDM requests.
    void collect_requests(uint64_t cycle, std::vector<MemRequest>& out);
    /// Second half: apply the arbiter's decision for the requests added above.
    void commit(uint64_t cycle, std::span<const MemRequest> requests, std::span<const uint8_t> granted);

    const DmaStats& stats() const { return stats_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    std::vector<DmaCompletion> take_completions();

private:
    struct Active {
        uint32_t id = 0;
        DmaJob job;
        uint64_t total_words = 0;
        uint64_t ext_words = 0;   // words moved across the external port
        uint64_t tcdm_words = 0;  // words issued on the TCDM side (reads) / retired (writes)
        uint64_t ext_ready_cycle = 0;
    };
    struct Staged {
        uint64_t word = 0;
        uint32_t value = 0;
    };

    uint64_t ext_address(const DmaJob& job, uint64_t word) const;
    uint32_t tcdm_address(const DmaJob& job, uint64_t word) const;
    void start_next(uint64_t cycle);
    void finish(uint64_t cycle);

    DmaConfig cfg_;
    Tcdm& tcdm_;
    ExtMemory& ext_;
    uint32_t ports_ = 2;
    uint32_t staging_words_ = 16;

    std::deque<std::pair<uint32_t, DmaJob>> queue_;
    bool active_valid_ = false;
    Active active_;
    std::vector<Staged> staging_;
    std::vector<uint64_t> pending_reads_;  // word indices requested this cycle
    std::vector<uint64_t> retry_reads_;
    uint64_t read_cursor_ = 0;
    std::vector<size_t> pending_writes_;   // staging slots requested this cycle
    std::vector<bool> completed_;
    std::vector<DmaCompletion> completions_;
    std::vector<std::string> warnings_;
    uint64_t last_completion_cycle_ = 0;
    bool ever_completed_ = false;
    DmaStats stats_;
};

}  // namespace ntx
