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

#include "ntx/loops_agu.hpp"

#include <limits>
#include <string>

#include "ntx/error.hpp"

namespace ntx {

HwLoopConfig HwLoopConfig::nest(std::span<const uint32_t> level_counts) {
    if (level_counts.size() > kLoopLevels) {
        fail(ErrorCode::InvalidArgument, "at most 5 loop levels are available");
    }
    HwLoopConfig cfg;
    for (size_t i = 0; i < level_counts.size(); ++i) {
        cfg.counts[i] = level_counts[i];
        cfg.enabled[i] = true;
    }
    cfg.validate();
    return cfg;
}

int HwLoopConfig::outer_level() const {
    int outer = -1;
    for (int i = 0; i < kLoopLevels; ++i) {
        if (enabled[i]) {
            outer = i;
        }
    }
    return outer;
}

uint64_t HwLoopConfig::iterations() const {
    uint64_t n = 1;
    for (int i = 0; i < kLoopLevels; ++i) {
        if (enabled[i]) {
            n *= counts[i];
        }
    }
    return outer_level() < 0 ? 0 : n;
}

void HwLoopConfig::validate() const {
    bool seen_disabled = false;
    for (int i = 0; i < kLoopLevels; ++i) {
        if (!enabled[i]) {
            seen_disabled = true;
            continue;
        }
        if (seen_disabled) {
            fail(ErrorCode::InvalidArgument, "enabled loops must form a prefix from level 0");
        }
        if (counts[i] < 1 || counts[i] > kMaxLoopCount) {
            fail(ErrorCode::InvalidArgument,
                 "loop " + std::to_string(i) + " count " + std::to_string(counts[i]) +
                     " outside [1, 65536]");
        }
    }
}

LoopStep loop_step(const HwLoopConfig& cfg, LoopState& state) {
    if (state.done) {
        fail(ErrorCode::InvalidArgument, "loop_step on an exhausted loop nest");
    }
    const int outer = cfg.outer_level();
    for (int level = 0; level <= outer; ++level) {
        if (uint32_t{state.counters[level]} + 1 < cfg.counts[level]) {
            ++state.counters[level];
            return {level, false};
        }
        state.counters[level] = 0;
    }
    state.done = true;
    return {-1, true};
}

void agu_step(const AguConfig& cfg, AguState& state, int level) {
    if (level < 0 || level >= kLoopLevels) {
        fail(ErrorCode::InvalidArgument, "AGU step level out of range");
    }
    const int64_t next = int64_t{state.address} + cfg.strides[level];
    if (next < 0 || next > int64_t{std::numeric_limits<uint32_t>::max()}) {
        fail(ErrorCode::AddressFault, "AGU address left the 32 bit address space");
    }
    state.address = static_cast<uint32_t>(next);
}

std::array<int32_t, kLoopLevels> compile_affine_strides(std::span<const int64_t> coeffs,
                                                        std::span<const uint32_t> counts) {
    if (coeffs.size() > kLoopLevels || counts.size() != coeffs.size()) {
        fail(ErrorCode::InvalidArgument, "affine map needs one count per coefficient, at most 5 levels");
    }
    std::array<int32_t, kLoopLevels> strides{};
    int64_t rewind = 0;  // sum_{j<m} (N_j - 1) * a_j
    for (size_t m = 0; m < coeffs.size(); ++m) {
        const int64_t s = coeffs[m] - rewind;
        if (s < std::numeric_limits<int32_t>::min() || s > std::numeric_limits<int32_t>::max()) {
            fail(ErrorCode::InvalidArgument, "stride for level " + std::to_string(m) + " overflows 32 bits");
        }
        strides[m] = static_cast<int32_t>(s);
        rewind += (int64_t{counts[m]} - 1) * coeffs[m];
    }
    return strides;
}

AguConfig compile_affine(uint32_t base, std::span<const int64_t> coeffs,
                         std::span<const uint32_t> counts) {
    return AguConfig{base, compile_affine_strides(coeffs, counts)};
}

}  // namespace ntx
