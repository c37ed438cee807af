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

#include "ntx/wide_fpu.hpp"

#include <array>
#include <bit>
#include <limits>
#include <string>

#include "ntx/error.hpp"

namespace ntx {

namespace {

using Words = std::array<uint64_t, WideAccumulator::kMaxWords>;

int highest_set_bit(const Words& m, int nwords) {
    for (int w = nwords - 1; w >= 0; --w) {
        if (m[w] != 0) {
            return w * 64 + 63 - std::countl_zero(m[w]);
        }
    }
    return -1;
}

bool test_bit(const Words& m, int nwords, int pos) {
    if (pos < 0 || pos >= nwords * 64) {
        return false;
    }
    return (m[pos / 64] >> (pos % 64)) & 1u;
}

// Bits [pos, pos + count) as an integer; count <= 64.
uint64_t extract_bits(const Words& m, int nwords, int pos, int count) {
    uint64_t out = 0;
    for (int i = 0; i < count; ++i) {
        if (test_bit(m, nwords, pos + i)) {
            out |= uint64_t{1} << i;
        }
    }
    return out;
}

// True if any bit strictly below `pos` is set.
bool any_below(const Words& m, int pos) {
    if (pos <= 0) {
        return false;
    }
    const int full = pos / 64;
    for (int w = 0; w < full; ++w) {
        if (m[w] != 0) {
            return true;
        }
    }
    const int rem = pos % 64;
    return rem != 0 && (m[full] & ((uint64_t{1} << rem) - 1)) != 0;
}

void negate(Words& m, int nwords) {
    uint64_t carry = 1;
    for (int w = 0; w < nwords; ++w) {
        const uint64_t inv = ~m[w];
        m[w] = inv + carry;
        carry = (carry && m[w] == 0) ? 1 : 0;
    }
}

}  // namespace

ExactProduct product_exact(F32 a, F32 b) {
    ExactProduct p;
    p.negative = a.sign() != b.sign();
    if (!a.is_finite() || !b.is_finite()) {
        p.invalid = true;
        return p;
    }
    const DecodedF32 da = decode(a);
    const DecodedF32 db = decode(b);
    p.magnitude = uint64_t{da.significand} * uint64_t{db.significand};
    p.exponent = da.exponent + db.exponent;
    return p;
}

WideAccumulator::WideAccumulator(AccumulatorGeometry geometry) : geometry_(geometry) {
    if (geometry_.width_bits < 64 || geometry_.width_bits > 64 * kMaxWords - 1) {
        fail(ErrorCode::InvalidArgument,
             "accumulator width must be in [64, " + std::to_string(64 * kMaxWords - 1) + "] bits");
    }
    nwords_ = (geometry_.width_bits + 1 + 63) / 64;
}

void WideAccumulator::init_zero() {
    words_.fill(0);
    overflow_ = false;
    overflow_negative_ = false;
    invalid_ = false;
    sticky_ = false;
}

void WideAccumulator::init(F32 seed) {
    init_zero();
    if (!seed.is_finite()) {
        invalid_ = true;
        return;
    }
    const DecodedF32 d = decode(seed);
    add_shifted(d.significand, d.exponent - geometry_.lsb_exponent, d.negative);
}

void WideAccumulator::add(const ExactProduct& p) {
    if (p.invalid) {
        invalid_ = true;
        return;
    }
    if (invalid_ || overflow_) {
        return;
    }
    add_shifted(p.magnitude, p.exponent - geometry_.lsb_exponent, p.negative);
}

void WideAccumulator::add_shifted(uint64_t magnitude, int shift, bool negative) {
    if (magnitude == 0) {
        return;
    }
    if (shift < 0) {
        const int r = -shift;
        const uint64_t lost = r >= 64 ? magnitude : (magnitude & ((uint64_t{1} << r) - 1));
        sticky_ = sticky_ || lost != 0;
        magnitude = r >= 64 ? 0 : magnitude >> r;
        if (magnitude == 0) {
            return;
        }
        shift = 0;
    }
    const int bitlen = 64 - std::countl_zero(magnitude);
    if (shift + bitlen > geometry_.width_bits - 1) {
        overflow_ = true;
        overflow_negative_ = negative;
        return;
    }

    const int wi = shift / 64;
    const int bi = shift % 64;
    const uint64_t lo = magnitude << bi;
    const uint64_t hi = bi != 0 ? magnitude >> (64 - bi) : 0;

    if (!negative) {
        uint64_t carry = 0;
        for (int w = wi; w < nwords_; ++w) {
            const uint64_t addend = w == wi ? lo : (w == wi + 1 ? hi : 0);
            uint64_t s;
            const bool c1 = __builtin_add_overflow(words_[w], addend, &s);
            const bool c2 = __builtin_add_overflow(s, carry, &s);
            words_[w] = s;
            carry = (c1 || c2) ? 1 : 0;
            if (carry == 0 && w > wi) {
                break;
            }
        }
    } else {
        uint64_t borrow = 0;
        for (int w = wi; w < nwords_; ++w) {
            const uint64_t sub = w == wi ? lo : (w == wi + 1 ? hi : 0);
            uint64_t d;
            const bool b1 = __builtin_sub_overflow(words_[w], sub, &d);
            const bool b2 = __builtin_sub_overflow(d, borrow, &d);
            words_[w] = d;
            borrow = (b1 || b2) ? 1 : 0;
            if (borrow == 0 && w > wi) {
                break;
            }
        }
    }

    if (!in_range()) {
        overflow_ = true;
        overflow_negative_ = is_negative();
    }
}

bool WideAccumulator::in_range() const {
    const uint64_t fill = (words_[nwords_ - 1] >> 63) != 0 ? ~uint64_t{0} : 0;
    const int first = geometry_.width_bits - 1;
    for (int w = first / 64; w < nwords_; ++w) {
        uint64_t mask = ~uint64_t{0};
        if (w == first / 64) {
            mask <<= (first % 64);
        }
        if ((words_[w] & mask) != (fill & mask)) {
            return false;
        }
    }
    return true;
}

bool WideAccumulator::is_negative() const {
    return (words_[nwords_ - 1] >> 63) != 0;
}

bool WideAccumulator::is_zero() const {
    for (int w = 0; w < nwords_; ++w) {
        if (words_[w] != 0) {
            return false;
        }
    }
    return true;
}

int WideAccumulator::compare(const WideAccumulator& other) const {
    if (nwords_ != other.nwords_ || geometry_.lsb_exponent != other.geometry_.lsb_exponent) {
        fail(ErrorCode::InvalidArgument, "cannot compare accumulators of different geometry");
    }
    const auto top_a = static_cast<int64_t>(words_[nwords_ - 1]);
    const auto top_b = static_cast<int64_t>(other.words_[nwords_ - 1]);
    if (top_a != top_b) {
        return top_a < top_b ? -1 : 1;
    }
    for (int w = nwords_ - 2; w >= 0; --w) {
        if (words_[w] != other.words_[w]) {
            return words_[w] < other.words_[w] ? -1 : 1;
        }
    }
    return 0;
}

F32 WideAccumulator::round() const {
    if (invalid_) {
        return F32::quiet_nan();
    }
    if (overflow_) {
        return F32::infinity(overflow_negative_);
    }

    const bool negative = is_negative();
    Words mag = words_;
    if (negative) {
        negate(mag, nwords_);
    }
    const int msb = highest_set_bit(mag, nwords_);
    if (msb < 0) {
        return F32::zero();
    }

    const uint32_t sign = negative ? F32::kSignMask : 0u;
    const int lsb = geometry_.lsb_exponent;
    const int min_normal_exp = 1 - F32::kBias;                     // -126
    const int min_subnormal_lsb = min_normal_exp - F32::kFracBits;  // -149

    int exp = msb + lsb;
    const bool normal = exp >= min_normal_exp;
    // Accumulator bit position that becomes the result's LSB.
    const int shift = normal ? msb - F32::kFracBits : min_subnormal_lsb - lsb;

    uint64_t sig = 0;
    if (shift <= 0) {
        sig = extract_bits(mag, nwords_, 0, msb + 1) << (-shift);
    } else {
        if (msb >= shift) {
            sig = extract_bits(mag, nwords_, shift, msb - shift + 1);
        }
        const bool round_bit = test_bit(mag, nwords_, shift - 1);
        const bool sticky = any_below(mag, shift - 1) || sticky_;
        if (round_bit && (sticky || (sig & 1u) != 0)) {
            ++sig;
        }
    }

    if (normal) {
        if (sig == (uint64_t{1} << (F32::kFracBits + 1))) {
            sig >>= 1;
            ++exp;
        }
        if (exp > F32::kBias) {
            return F32::infinity(negative);
        }
        const auto biased = static_cast<uint32_t>(exp + F32::kBias);
        return F32{sign | (biased << F32::kFracBits) | (static_cast<uint32_t>(sig) & F32::kFracMask)};
    }
    // Subnormal range; a carry into bit 23 lands exactly on the smallest normal.
    return F32{sign | static_cast<uint32_t>(sig)};
}

int read_arity(FpuOpcode op) {
    switch (op) {
    case FpuOpcode::Mac:
    case FpuOpcode::Vmul:
    case FpuOpcode::Vadd:
    case FpuOpcode::Vsub:
        return 2;
    case FpuOpcode::Fill:
        return 0;
    default:
        return 1;
    }
}

bool is_reduction(FpuOpcode op) {
    switch (op) {
    case FpuOpcode::Mac:
    case FpuOpcode::Min:
    case FpuOpcode::Max:
    case FpuOpcode::Argmin:
    case FpuOpcode::Argmax:
        return true;
    default:
        return false;
    }
}

int flops_per_element(FpuOpcode op) {
    switch (op) {
    case FpuOpcode::Mac:
        return 2;
    case FpuOpcode::Copy:
    case FpuOpcode::Fill:
        return 0;
    default:
        return 1;
    }
}

namespace {
constexpr std::array<std::string_view, kOpcodeCount> kOpcodeNames = {
    "MAC", "VMUL", "VADD", "VSUB", "MIN", "MAX",
    "ARGMIN", "ARGMAX", "RELU", "THRESHOLD_MASK", "COPY", "FILL",
};
}  // namespace

std::string_view opcode_name(FpuOpcode op) {
    const auto i = static_cast<size_t>(op);
    return i < kOpcodeNames.size() ? kOpcodeNames[i] : std::string_view{"?"};
}

std::optional<FpuOpcode> opcode_from_name(std::string_view name) {
    for (size_t i = 0; i < kOpcodeNames.size(); ++i) {
        if (kOpcodeNames[i] == name) {
            return static_cast<FpuOpcode>(i);
        }
    }
    return std::nullopt;
}

void init_element(FpuOpcode op, FpuSidePath& side, WideAccumulator& acc, std::optional<F32> seed) {
    if (seed) {
        acc.init(*seed);
    } else {
        acc.init_zero();
    }
    side.cmp_index = 0;
    switch (op) {
    case FpuOpcode::Min:
    case FpuOpcode::Argmin:
        side.cmp_value = seed ? *seed : F32::infinity(false);
        break;
    case FpuOpcode::Max:
    case FpuOpcode::Argmax:
        side.cmp_value = seed ? *seed : F32::infinity(true);
        break;
    default:
        break;
    }
}

std::optional<F32> execute_element(FpuOpcode op, FpuSidePath& side, WideAccumulator& acc,
                                   F32 in0, F32 in1, uint32_t index) {
    const float a = in0.to_float();
    const float b = in1.to_float();
    switch (op) {
    case FpuOpcode::Mac:
        acc.mac(in0, in1);
        return std::nullopt;
    case FpuOpcode::Vmul:
        return F32::from_float(a * b);
    case FpuOpcode::Vadd:
        return F32::from_float(a + b);
    case FpuOpcode::Vsub:
        return F32::from_float(a - b);
    case FpuOpcode::Min:
    case FpuOpcode::Argmin:
        if (!in0.is_nan() && (side.cmp_value.is_nan() || a < side.cmp_value.to_float())) {
            side.cmp_value = in0;
            side.cmp_index = index;
        }
        return std::nullopt;
    case FpuOpcode::Max:
    case FpuOpcode::Argmax:
        if (!in0.is_nan() && (side.cmp_value.is_nan() || a > side.cmp_value.to_float())) {
            side.cmp_value = in0;
            side.cmp_index = index;
        }
        return std::nullopt;
    case FpuOpcode::Relu:
        return a > 0.0f ? in0 : F32::zero();
    case FpuOpcode::ThresholdMask:
        return a > side.alu_reg.to_float() ? F32::one() : F32::zero();
    case FpuOpcode::Copy:
        return in0;
    case FpuOpcode::Fill:
        return side.alu_reg;
    }
    return std::nullopt;
}

F32 reduction_result(FpuOpcode op, const FpuSidePath& side, const WideAccumulator& acc) {
    switch (op) {
    case FpuOpcode::Mac:
        return acc.round();
    case FpuOpcode::Argmin:
    case FpuOpcode::Argmax:
        return F32{side.cmp_index};
    default:
        return side.cmp_value;
    }
}

}  // namespace ntx
