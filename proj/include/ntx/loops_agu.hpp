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
#include <span>

namespace ntx {

inline constexpr int kLoopLevels = 5;
inline constexpr int kAguCount = 3;
inline constexpr uint32_t kMaxLoopCount = 65536;  // 16 bit counter, 0 .. N-1

/// Iteration counts of the five cascaded hardware loops. Level 0 is the
/// innermost loop; enabled levels form a prefix starting at level 0.
struct HwLoopConfig {
    std::array<uint32_t, kLoopLevels> counts{1, 1, 1, 1, 1};
    std::array<bool, kLoopLevels> enabled{};

    /// Enables levels 0 .. counts.size()-1 with the given iteration counts.
    static HwLoopConfig nest(std::span<const uint32_t> level_counts);

    /// Highest enabled level, or -1 when no loop is enabled.
    int outer_level() const;
    uint64_t iterations() const;
    /// Throws InvalidArgument on a non-prefix enable mask or a count outside [1, 65536].
    void validate() const;
};

struct LoopState {
    std::array<uint16_t, kLoopLevels> counters{};
    bool done = false;
};

struct LoopStep {
    int incremented_level = -1;  // -1 once the nest is exhausted
    bool done = false;
};

/// Advance the counter cascade by one innermost iteration.
LoopStep loop_step(const HwLoopConfig& cfg, LoopState& state);

struct AguConfig {
    uint32_t base = 0;
    std::array<int32_t, kLoopLevels> strides{};
};

struct AguState {
    uint32_t address = 0;
};

/// address += strides[level]; leaving the 32 bit address space is a fault.
void agu_step(const AguConfig& cfg, AguState& state, int level);

/// Turn per-level byte coefficients of an affine map (address = base +
/// sum coeff[j] * i_j) into the delta strides the AGU adds when level m is the
/// outermost loop that incremented.
std::array<int32_t, kLoopLevels> compile_affine_strides(std::span<const int64_t> coeffs,
                                                        std::span<const uint32_t> counts);

AguConfig compile_affine(uint32_t base, std::span<const int64_t> coeffs,
                         std::span<const uint32_t> counts);

}  // namespace ntx
