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
#include <span>
#include <string>
#include <vector>

#include "ntx/f32.hpp"

namespace ntx {

struct TcdmConfig {
    uint32_t size_bytes = 65536;
    uint32_t banks = 32;
    uint32_t word_bytes = 4;

    void validate() const;
};

enum class MemKind : uint8_t { Read, Write };

struct MemRequest {
    uint16_t requester = 0;     // unique per NTX port / DMA port
    MemKind kind = MemKind::Read;
    bool low_priority = false;  // DMA traffic yields to NTX traffic
    uint32_t address = 0;
    uint32_t value = 0;         // payload of a write
};

struct ArbiterStats {
    uint64_t cycles = 0;
    // NTX (high priority) traffic
    uint64_t requests = 0;
    uint64_t grants = 0;
    uint64_t conflicts = 0;
    // DMA (low priority) traffic
    uint64_t low_requests = 0;
    uint64_t low_grants = 0;
    uint64_t low_deferred = 0;
    std::vector<uint64_t> stalls_per_requester;

    /// Fraction of NTX requests that lost arbitration in the cycle they were issued.
    double conflict_probability() const {
        return requests == 0 ? 0.0 : static_cast<double>(conflicts) / static_cast<double>(requests);
    }
};

// Per-cycle bank arbiter: at most one grant per bank, round-robin among the
// requesters of a bank, high-priority requests strictly before low-priority ones.
class BankArbiter {
public:
    static constexpr uint32_t kMaxRequesters = 1024;

    explicit BankArbiter(uint32_t banks);

    /// granted[i] is set to 1 for each granted request, 0 for deferred ones.
    void arbitrate(std::span<const MemRequest> requests, std::span<const uint32_t> banks,
                   std::span<uint8_t> granted);

    const ArbiterStats& stats() const { return stats_; }
    void reset_stats();

private:
    uint32_t banks_;
    std::vector<uint16_t> last_grant_;
    std::vector<int32_t> winner_;
    std::vector<uint32_t> touched_;
    ArbiterStats stats_;
};

// 64 KiB word-interleaved scratchpad shared by all NTX and the DMA engine.
class Tcdm {
public:
    explicit Tcdm(TcdmConfig cfg = {});

    const TcdmConfig& config() const { return cfg_; }

    /// Word-interleaved bank index: (address / word_bytes) mod banks.
    uint32_t bank_of(uint32_t address) const;
    /// Throws AddressFault on a misaligned or out-of-range address.
    void check(uint32_t address) const;

    F32 read(uint32_t address) const { return F32{read_word(address)}; }
    void write(uint32_t address, F32 value) { write_word(address, value.bits); }
    uint32_t read_word(uint32_t address) const;
    void write_word(uint32_t address, uint32_t value);

    std::span<const uint32_t> words() const { return mem_; }
    void clear();

    /// Raw little-endian image of the whole memory.
    void load_image(const std::string& path);
    void save_image(const std::string& path) const;

    void arbitrate(std::span<const MemRequest> requests, std::span<uint8_t> granted);
    const ArbiterStats& stats() const { return arbiter_.stats(); }
    void reset_stats() { arbiter_.reset_stats(); }

private:
    TcdmConfig cfg_;
    std::vector<uint32_t> mem_;
    BankArbiter arbiter_;
    std::vector<uint32_t> bank_scratch_;
};

}  // namespace ntx
