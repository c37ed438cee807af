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

#include <bit>
#include <cstdint>

namespace ntx {

/// IEEE 754 binary32 operand, kept as its raw bit pattern so that NaN payloads,
/// signed zeros and subnormals survive every trip through the simulator.
struct F32 {
    uint32_t bits = 0;

    static constexpr uint32_t kSignMask = 0x80000000u;
    static constexpr uint32_t kExpMask = 0x7F800000u;
    static constexpr uint32_t kFracMask = 0x007FFFFFu;
    static constexpr int kBias = 127;
    static constexpr int kFracBits = 23;

    static constexpr F32 from_bits(uint32_t b) { return F32{b}; }
    static F32 from_float(float f) { return F32{std::bit_cast<uint32_t>(f)}; }
    float to_float() const { return std::bit_cast<float>(bits); }

    static constexpr F32 zero() { return F32{0}; }
    static constexpr F32 one() { return F32{0x3F800000u}; }
    static constexpr F32 infinity(bool negative = false) {
        return F32{(negative ? kSignMask : 0u) | kExpMask};
    }
    static constexpr F32 quiet_nan() { return F32{0x7FC00000u}; }

    constexpr bool sign() const { return (bits & kSignMask) != 0; }
    constexpr uint32_t biased_exponent() const { return (bits & kExpMask) >> kFracBits; }
    constexpr uint32_t fraction() const { return bits & kFracMask; }

    constexpr bool is_nan() const { return biased_exponent() == 0xFF && fraction() != 0; }
    constexpr bool is_inf() const { return biased_exponent() == 0xFF && fraction() == 0; }
    constexpr bool is_finite() const { return biased_exponent() != 0xFF; }
    constexpr bool is_zero() const { return (bits & ~kSignMask) == 0; }
    constexpr bool is_subnormal() const { return biased_exponent() == 0 && fraction() != 0; }

    friend constexpr bool operator==(F32 a, F32 b) { return a.bits == b.bits; }
};

enum class F32Class { Zero, Subnormal, Normal, Infinity, NaN };

/// Field-level view of a binary32 value. For finite values the real number is
/// (-1)^negative * significand * 2^exponent, with `exponent` the weight of the
/// significand's least significant bit.
struct DecodedF32 {
    F32Class cls = F32Class::Zero;
    bool negative = false;
    uint32_t significand = 0;  // 24 bits with hidden one for normals
    int exponent = 0;          // LSB weight; -149 for subnormals
    uint32_t nan_payload = 0;  // fraction bits of a NaN
};

constexpr DecodedF32 decode(F32 x) {
    DecodedF32 d;
    d.negative = x.sign();
    const uint32_t e = x.biased_exponent();
    const uint32_t f = x.fraction();
    if (e == 0xFF) {
        d.cls = f == 0 ? F32Class::Infinity : F32Class::NaN;
        d.nan_payload = f;
        return d;
    }
    if (e == 0) {
        d.cls = f == 0 ? F32Class::Zero : F32Class::Subnormal;
        d.significand = f;
        d.exponent = 1 - F32::kBias - F32::kFracBits;
        return d;
    }
    d.cls = F32Class::Normal;
    d.significand = f | (1u << F32::kFracBits);
    d.exponent = static_cast<int>(e) - F32::kBias - F32::kFracBits;
    return d;
}

constexpr F32 encode(const DecodedF32& d) {
    const uint32_t s = d.negative ? F32::kSignMask : 0u;
    switch (d.cls) {
    case F32Class::Zero:
        return F32{s};
    case F32Class::Subnormal:
        return F32{s | (d.significand & F32::kFracMask)};
    case F32Class::Normal: {
        const uint32_t e = static_cast<uint32_t>(d.exponent + F32::kBias + F32::kFracBits);
        return F32{s | (e << F32::kFracBits) | (d.significand & F32::kFracMask)};
    }
    case F32Class::Infinity:
        return F32{s | F32::kExpMask};
    case F32Class::NaN:
        return F32{s | F32::kExpMask | (d.nan_payload ? d.nan_payload : 0x400000u)};
    }
    return F32{};
}

}  // namespace ntx
