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

#include <cmath>
#include <cstdint>
#include <random>

#include <gtest/gtest.h>

#include "exact_oracle.hpp"
#include "ntx/wide_fpu.hpp"

namespace ntx {
namespace {

F32 f(float v) { return F32::from_float(v); }

double product_value(const ExactProduct& p) {
    const double m = std::ldexp(static_cast<double>(p.magnitude), p.exponent);
    return p.negative ? -m : m;
}

TEST(ProductExact, ShortSignificands) {
    EXPECT_EQ(product_value(product_exact(f(1.5f), f(1.5f))), 2.25);
}

TEST(ProductExact, ZeroAnnihilates) {
    EXPECT_EQ(product_exact(f(123.25f), f(0.0f)).magnitude, 0u);
    EXPECT_EQ(product_exact(f(-0.0f), f(-7.0f)).magnitude, 0u);
}

TEST(ProductExact, FullWidthSignificand) {
    const float x = 1.0f + std::ldexp(1.0f, -23);
    const double expect = 1.0 + std::ldexp(1.0, -22) + std::ldexp(1.0, -46);
    EXPECT_EQ(product_value(product_exact(f(x), f(x))), expect);
}

TEST(ProductExact, NonFiniteIsInvalid) {
    EXPECT_TRUE(product_exact(F32::infinity(), f(1.0f)).invalid);
    EXPECT_TRUE(product_exact(F32::quiet_nan(), f(0.0f)).invalid);
}

TEST(WideAccumulator, InitZero) {
    WideAccumulator acc;
    acc.init(f(3.0f));
    acc.init_zero();
    EXPECT_TRUE(acc.is_zero());
    EXPECT_FALSE(acc.overflow());
    EXPECT_FALSE(acc.invalid());
    EXPECT_EQ(acc.round(), F32::zero());
}

TEST(WideAccumulator, InitOneScalesByLsbWeight) {
    WideAccumulator acc;
    acc.init(F32::one());
    const auto w = acc.words();
    for (size_t i = 0; i < w.size(); ++i) {
        EXPECT_EQ(w[i], i == 2 ? (uint64_t{1} << 22) : 0u) << "word " << i;  // bit 150
    }
}

TEST(WideAccumulator, InitNegativeSmallestNormal) {
    WideAccumulator acc;
    acc.init(f(-std::ldexp(1.0f, -126)));
    const auto w = acc.words();
    EXPECT_EQ(w[0], ~uint64_t{0} << 24);  // -(2^24) in two's complement
    for (size_t i = 1; i < w.size(); ++i) {
        EXPECT_EQ(w[i], ~uint64_t{0});
    }
    EXPECT_TRUE(acc.is_negative());
    EXPECT_EQ(acc.round().to_float(), -std::ldexp(1.0f, -126));
}

TEST(WideAccumulator, CancellationKeepsSmallTerm) {
    const float big = std::ldexp(1.0f, 24);
    WideAccumulator acc;
    acc.init_zero();
    acc.mac(f(big), f(1.0f));
    acc.mac(f(1.0f), f(1.0f));
    acc.mac(f(-big), f(1.0f));
    EXPECT_EQ(acc.round().to_float(), 1.0f);

    float chain = 0.0f;
    chain = std::fma(big, 1.0f, chain);
    chain = std::fma(1.0f, 1.0f, chain);
    chain = std::fma(-big, 1.0f, chain);
    EXPECT_EQ(chain, 0.0f);
}

TEST(WideAccumulator, MacWithZeroIsNoOp) {
    WideAccumulator acc;
    acc.init(f(0.375f));
    const std::vector<uint64_t> before(acc.words().begin(), acc.words().end());
    acc.mac(f(0.0f), f(-12.0f));
    EXPECT_TRUE(std::equal(before.begin(), before.end(), acc.words().begin()));
}

TEST(WideAccumulator, RoundsTiesToEven) {
    WideAccumulator acc;
    acc.init(F32::one());
    acc.mac(f(std::ldexp(1.0f, -25)), F32::one());
    EXPECT_EQ(acc.round().to_float(), 1.0f);

    acc.init(f(1.0f + std::ldexp(1.0f, -23)));
    acc.mac(f(std::ldexp(1.0f, -24)), F32::one());
    EXPECT_EQ(acc.round().to_float(), 1.0f + std::ldexp(1.0f, -22));
}

TEST(WideAccumulator, OverflowRoundsToInfinity) {
    // 2^128 - 2^100 lies above the midpoint between FLT_MAX and 2^128.
    WideAccumulator acc;
    acc.init_zero();
    acc.mac(f(std::ldexp(1.0f, 64)), f(std::ldexp(1.0f, 64)));
    acc.mac(f(-std::ldexp(1.0f, 50)), f(std::ldexp(1.0f, 50)));
    EXPECT_TRUE(acc.round().is_inf());
    EXPECT_FALSE(acc.round().sign());

    oracle::ExactAccumulator ref;
    ref.init_zero();
    ref.mac(f(std::ldexp(1.0f, 64)), f(std::ldexp(1.0f, 64)));
    ref.mac(f(-std::ldexp(1.0f, 50)), f(std::ldexp(1.0f, 50)));
    EXPECT_EQ(acc.round(), ref.round());
}

TEST(WideAccumulator, NonFinitePoisons) {
    WideAccumulator acc;
    acc.init_zero();
    acc.mac(F32::infinity(), f(2.0f));
    EXPECT_TRUE(acc.invalid());
    EXPECT_TRUE(acc.round().is_nan());

    acc.init(F32::quiet_nan());
    EXPECT_TRUE(acc.round().is_nan());
    acc.init(f(1.0f));
    EXPECT_FALSE(acc.invalid());
}

TEST(WideAccumulator, ExactZeroIsPositive) {
    WideAccumulator acc;
    acc.init(f(-2.0f));
    acc.mac(f(2.0f), F32::one());
    EXPECT_EQ(acc.round(), F32::zero());
}

TEST(WideAccumulator, MatchesExactOracleOnRandomSums) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::uniform_int_distribution<int> e(-40, 40);
    for (int trial = 0; trial < 200; ++trial) {
        WideAccumulator acc;
        oracle::ExactAccumulator ref;
        const F32 seed = f(std::ldexp(u(rng), e(rng)));
        acc.init(seed);
        ref.init(seed);
        for (int i = 0; i < 500; ++i) {
            const F32 a = f(std::ldexp(u(rng), e(rng)));
            const F32 b = f(std::ldexp(u(rng), e(rng)));
            acc.mac(a, b);
            ref.mac(a, b);
        }
        ASSERT_EQ(acc.round().bits, ref.round().bits) << "trial " << trial;
    }
}

TEST(WideAccumulator, SubnormalProductsAgreeWithOracle) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<uint32_t> frac(1, 0x7FFFFF);
    for (int trial = 0; trial < 200; ++trial) {
        WideAccumulator acc;
        oracle::ExactAccumulator ref;
        acc.init_zero();
        ref.init_zero();
        for (int i = 0; i < 16; ++i) {
            const F32 a = F32::from_bits(frac(rng) | (i % 2 ? 0x80000000u : 0u));
            const F32 b = f(std::ldexp(1.0f, 100 + i));
            acc.mac(a, b);
            ref.mac(a, b);
        }
        ASSERT_EQ(acc.round().bits, ref.round().bits) << "trial " << trial;
    }
}

TEST(WideAccumulator, OrderInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1000.0f, 1000.0f);
    std::vector<std::pair<F32, F32>> terms;
    for (int i = 0; i < 300; ++i) {
        terms.emplace_back(f(u(rng)), f(u(rng)));
    }
    WideAccumulator forward;
    forward.init_zero();
    for (const auto& [a, b] : terms) {
        forward.mac(a, b);
    }
    for (int perm = 0; perm < 5; ++perm) {
        std::shuffle(terms.begin(), terms.end(), rng);
        WideAccumulator acc;
        acc.init_zero();
        for (const auto& [a, b] : terms) {
            acc.mac(a, b);
        }
        EXPECT_EQ(acc.compare(forward), 0);
        EXPECT_EQ(acc.round(), forward.round());
    }
}

TEST(WideAccumulator, RoundingIsMonotone) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(-4.0f, 4.0f);
    for (int trial = 0; trial < 1000; ++trial) {
        WideAccumulator x, y;
        x.init(f(u(rng)));
        y.init(f(u(rng)));
        x.mac(f(u(rng)), f(std::ldexp(u(rng), -30)));
        y.mac(f(u(rng)), f(std::ldexp(u(rng), -30)));
        if (x.compare(y) > 0) {
            std::swap(x, y);
        }
        EXPECT_LE(x.round().to_float(), y.round().to_float());
    }
}

TEST(ExecuteElement, MaxUpdatesValueAndIndex) {
    FpuSidePath side;
    WideAccumulator acc;
    init_element(FpuOpcode::Max, side, acc, std::nullopt);
    EXPECT_TRUE(side.cmp_value.is_inf() && side.cmp_value.sign());
    execute_element(FpuOpcode::Max, side, acc, f(3.0f), F32::zero(), 7);
    EXPECT_EQ(side.cmp_value.to_float(), 3.0f);
    EXPECT_EQ(side.cmp_index, 7u);
}

TEST(ExecuteElement, NanLosesComparisons) {
    FpuSidePath side;
    WideAccumulator acc;
    init_element(FpuOpcode::Min, side, acc, std::nullopt);
    execute_element(FpuOpcode::Min, side, acc, f(2.0f), F32::zero(), 0);
    execute_element(FpuOpcode::Min, side, acc, F32::quiet_nan(), F32::zero(), 1);
    EXPECT_EQ(side.cmp_value.to_float(), 2.0f);
    EXPECT_EQ(side.cmp_index, 0u);
}

TEST(ExecuteElement, ArgmaxKeepsFirstOfEqualValues) {
    FpuSidePath side;
    WideAccumulator acc;
    init_element(FpuOpcode::Argmax, side, acc, std::nullopt);
    const float xs[] = {1.0f, 5.0f, 2.0f, 5.0f};
    for (uint32_t i = 0; i < 4; ++i) {
        execute_element(FpuOpcode::Argmax, side, acc, f(xs[i]), F32::zero(), i);
    }
    EXPECT_EQ(reduction_result(FpuOpcode::Argmax, side, acc).bits, 1u);
}

TEST(ExecuteElement, ElementwiseOps) {
    FpuSidePath side;
    WideAccumulator acc;
    side.alu_reg = f(0.5f);
    EXPECT_EQ(execute_element(FpuOpcode::Relu, side, acc, f(-2.5f), F32::zero(), 0), F32::zero());
    EXPECT_EQ(execute_element(FpuOpcode::Relu, side, acc, f(1.25f), F32::zero(), 0), f(1.25f));
    EXPECT_EQ(execute_element(FpuOpcode::ThresholdMask, side, acc, f(0.75f), F32::zero(), 0), F32::one());
    EXPECT_EQ(execute_element(FpuOpcode::ThresholdMask, side, acc, f(0.5f), F32::zero(), 0), F32::zero());
    EXPECT_EQ(execute_element(FpuOpcode::Copy, side, acc, f(9.0f), F32::zero(), 0), f(9.0f));
    EXPECT_EQ(execute_element(FpuOpcode::Fill, side, acc, f(9.0f), F32::zero(), 0), f(0.5f));
    EXPECT_EQ(execute_element(FpuOpcode::Vadd, side, acc, f(1.0f), f(2.0f), 0), f(3.0f));
    EXPECT_EQ(execute_element(FpuOpcode::Vsub, side, acc, f(1.0f), f(2.0f), 0), f(-1.0f));
    EXPECT_EQ(execute_element(FpuOpcode::Vmul, side, acc, f(1.5f), f(2.0f), 0), f(3.0f));
}

TEST(Opcode, NamesRoundTrip) {
    for (int i = 0; i < kOpcodeCount; ++i) {
        const auto op = static_cast<FpuOpcode>(i);
        EXPECT_EQ(opcode_from_name(opcode_name(op)), op);
    }
    EXPECT_FALSE(opcode_from_name("nope").has_value());
    EXPECT_EQ(read_arity(FpuOpcode::Mac), 2);
    EXPECT_EQ(read_arity(FpuOpcode::Relu), 1);
    EXPECT_EQ(read_arity(FpuOpcode::Fill), 0);
}

}  // namespace
}  // namespace ntx
