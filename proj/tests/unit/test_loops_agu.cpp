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

#include <cstdint>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ntx/error.hpp"
#include "ntx/loops_agu.hpp"

namespace ntx {
namespace {

std::vector<uint32_t> v(std::initializer_list<uint32_t> xs) { return xs; }

TEST(LoopStep, SingleLevelWrapFinishes) {
    const auto counts = v({3});
    const auto cfg = HwLoopConfig::nest(counts);
    LoopState st;
    st.counters[0] = 2;
    const LoopStep s = loop_step(cfg, st);
    EXPECT_TRUE(s.done);
    EXPECT_TRUE(st.done);
    EXPECT_EQ(st.counters[0], 0);
}

TEST(LoopStep, BaseTwoOdometer) {
    const auto counts = v({2, 2});
    const auto cfg = HwLoopConfig::nest(counts);
    LoopState st;
    st.counters[0] = 1;
    const LoopStep s = loop_step(cfg, st);
    EXPECT_FALSE(s.done);
    EXPECT_EQ(s.incremented_level, 1);
    EXPECT_EQ(st.counters[0], 0);
    EXPECT_EQ(st.counters[1], 1);
}

TEST(LoopStep, SteppingDoneStateThrows) {
    const auto counts = v({1});
    const auto cfg = HwLoopConfig::nest(counts);
    LoopState st;
    loop_step(cfg, st);
    EXPECT_THROW(loop_step(cfg, st), Error);
}

TEST(LoopStep, RandomNestsEnumerateLexicographically) {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int levels = 1 + static_cast<int>(rng() % 5);
        std::vector<uint32_t> counts(levels);
        for (auto& c : counts) {
            c = 1 + rng() % 4;
        }
        const auto cfg = HwLoopConfig::nest(counts);
        std::vector<uint32_t> expect(levels, 0);  // odometer, level 0 fastest
        LoopState st;
        uint64_t steps = 0;
        while (true) {
            for (int l = 0; l < levels; ++l) {
                ASSERT_EQ(st.counters[l], expect[l]);
            }
            const LoopStep s = loop_step(cfg, st);
            ++steps;
            int l = 0;
            while (l < levels && ++expect[l] == counts[l]) {
                expect[l++] = 0;
            }
            if (l == levels) {
                EXPECT_TRUE(s.done);
                break;
            }
            EXPECT_EQ(s.incremented_level, l);
        }
        EXPECT_EQ(steps, cfg.iterations());
    }
}

TEST(HwLoopConfig, ValidateRejectsGapsAndBadCounts) {
    HwLoopConfig cfg;
    cfg.enabled = {true, false, true, false, false};
    EXPECT_THROW(cfg.validate(), Error);
    cfg.enabled = {true, false, false, false, false};
    cfg.counts[0] = 0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.counts[0] = kMaxLoopCount;
    EXPECT_NO_THROW(cfg.validate());
    cfg.counts[0] = kMaxLoopCount + 1;
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(AguStep, InnerStride) {
    AguConfig cfg;
    cfg.strides[0] = 4;
    AguState st;
    std::vector<uint32_t> seen;
    for (int i = 0; i < 3; ++i) {
        agu_step(cfg, st, 0);
        seen.push_back(st.address);
    }
    EXPECT_EQ(seen, v({4, 8, 12}));
}

TEST(AguStep, ZeroStridesHoldAddress) {
    AguConfig cfg;
    cfg.base = 0x40;
    AguState st{cfg.base};
    for (int l = 0; l < kLoopLevels; ++l) {
        agu_step(cfg, st, l);
        EXPECT_EQ(st.address, 0x40u);
    }
}

TEST(AguStep, LeavingAddressSpaceFaults) {
    AguConfig cfg;
    cfg.strides[1] = -8;
    AguState st{4};
    EXPECT_THROW(agu_step(cfg, st, 1), Error);
}

TEST(CompileAffine, Examples) {
    const std::vector<int64_t> a1{4};
    const auto n1 = v({7});
    EXPECT_EQ(compile_affine_strides(a1, n1)[0], 4);

    const std::vector<int64_t> a2{4, 100};
    const auto n2 = v({10, 3});
    const auto s2 = compile_affine_strides(a2, n2);
    EXPECT_EQ(s2[0], 4);
    EXPECT_EQ(s2[1], 64);
}

TEST(CompileAffine, StrideOverflowRejected) {
    const std::vector<int64_t> a{int64_t{1} << 30, int64_t{-(int64_t{1} << 31)}};
    const auto n = v({4, 2});
    EXPECT_THROW(compile_affine_strides(a, n), Error);
}

// Walks the nest with loop_step/agu_step and compares each address with
// base + sum a_j * i_j.
void check_affine(uint32_t base, const std::vector<int64_t>& coeffs, const std::vector<uint32_t>& counts) {
    const AguConfig agu = compile_affine(base, coeffs, counts);
    const auto cfg = HwLoopConfig::nest(counts);
    LoopState st;
    AguState as{agu.base};
    uint64_t points = 0;
    while (true) {
        int64_t expect = base;
        for (size_t j = 0; j < coeffs.size(); ++j) {
            expect += coeffs[j] * st.counters[j];
        }
        ASSERT_EQ(int64_t{as.address}, expect) << "point " << points;
        ++points;
        const LoopStep s = loop_step(cfg, st);
        if (s.done) {
            break;
        }
        agu_step(agu, as, s.incremented_level);
    }
    EXPECT_EQ(points, cfg.iterations());
}

TEST(CompileAffine, TileWalkInWideImage) {
    // 8x8 tile, 4-byte pixels, 64-pixel rows, then a second tile column
    check_affine(0x100, {4, 256, 32}, {8, 8, 8});
}

TEST(CompileAffine, TwoLevelMap) { check_affine(0, {4, 100}, {10, 5}); }

TEST(CompileAffine, RandomMapsReproduceOracle) {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const int levels = 1 + static_cast<int>(rng() % 5);
        std::vector<int64_t> coeffs(levels);
        std::vector<uint32_t> counts(levels);
        for (int l = 0; l < levels; ++l) {
            coeffs[l] = 4 * (static_cast<int64_t>(rng() % 200) - 50);
            counts[l] = 1 + rng() % 5;
        }
        check_affine(1u << 20, coeffs, counts);
    }
}

}  // namespace
}  // namespace ntx
