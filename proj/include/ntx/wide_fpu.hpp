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
#include <string_view>

#include "ntx/f32.hpp"

namespace ntx {

/// Exact product of two binary32 operands: (-1)^negative * magnitude * 2^exponent.
/// The magnitude holds the full 48 bit significand product.
struct ExactProduct {
    bool negative = false;
    uint64_t magnitude = 0;
    int exponent = 0;
    bool invalid = false;  // an operand was inf or NaN
};

ExactProduct product_exact(F32 a, F32 b);

/// Fixed-point layout of the accumulator. The register holds a two's
/// complement integer of `width_bits` bits whose LSB weighs 2^lsb_exponent.
struct AccumulatorGeometry {
    int width_bits = 304;
    int lsb_exponent = -150;
};

// Wide fixed-point accumulator. Products are added without any rounding; the
// only rounding step happens in round(). Bits of a product that fall below the
// LSB are truncated and remembered in a sticky flag.
class WideAccumulator {
public:
    static constexpr int kMaxWords = 8;

    explicit WideAccumulator(AccumulatorGeometry geometry = {});

    void init_zero();
    void init(F32 seed);

    void mac(F32 a, F32 b) { add(product_exact(a, b)); }
    void add(const ExactProduct& p);

    /// Round the held value once to binary32, ties to even.
    F32 round() const;

    bool overflow() const { return overflow_; }
    bool invalid() const { return invalid_; }
    bool sticky() const { return sticky_; }
    bool is_negative() const;
    bool is_zero() const;

    const AccumulatorGeometry& geometry() const { return geometry_; }

    /// Two's complement storage, least significant word first. The storage is
    /// one word wider than needed so that out-of-range sums can be detected.
    std::span<const uint64_t> words() const { return {words_.data(), static_cast<size_t>(nwords_)}; }

    /// Three-way comparison of the held values (both must be valid).
    int compare(const WideAccumulator& other) const;

private:
    void add_shifted(uint64_t magnitude, int shift, bool negative);
    bool in_range() const;

    AccumulatorGeometry geometry_;
    int nwords_ = 0;
    std::array<uint64_t, kMaxWords> words_{};
    bool overflow_ = false;
    bool overflow_negative_ = false;
    bool invalid_ = false;
    bool sticky_ = false;
};

enum class FpuOpcode : uint8_t {
    Mac = 0,
    Vmul,
    Vadd,
    Vsub,
    Min,
    Max,
    Argmin,
    Argmax,
    Relu,
    ThresholdMask,
    Copy,
    Fill,
};

inline constexpr int kOpcodeCount = 12;

/// Number of memory operands consumed per innermost iteration.
int read_arity(FpuOpcode op);
/// Reductions write once per store scope; all other opcodes write per element.
bool is_reduction(FpuOpcode op);
/// Flops credited per innermost iteration (MAC counts as two).
int flops_per_element(FpuOpcode op);
std::string_view opcode_name(FpuOpcode op);
std::optional<FpuOpcode> opcode_from_name(std::string_view name);

/// Comparator, index counter and ALU register that sit beside the FMAC.
struct FpuSidePath {
    F32 cmp_value{};
    uint32_t cmp_index = 0;
    F32 alu_reg{};
};

/// Accumulator/comparator initialisation at the start of an init scope. With
/// no seed, comparators start from the identity of their ordering (+inf for
/// MIN/ARGMIN, -inf for MAX/ARGMAX) and the accumulator from zero.
void init_element(FpuOpcode op, FpuSidePath& side, WideAccumulator& acc, std::optional<F32> seed);

/// One innermost iteration. Returns the value to write for element-wise
/// opcodes; reductions return nothing and are read out by reduction_result().
std::optional<F32> execute_element(FpuOpcode op, FpuSidePath& side, WideAccumulator& acc,
                                   F32 in0, F32 in1, uint32_t index);

/// Value written back when a store scope closes. ARGMIN/ARGMAX write the raw
/// 32 bit index.
F32 reduction_result(FpuOpcode op, const FpuSidePath& side, const WideAccumulator& acc);

}  // namespace ntx
