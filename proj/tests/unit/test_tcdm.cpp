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
#include <filesystem>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ntx/error.hpp"
#include "ntx/tcdm.hpp"

namespace ntx {
namespace {

MemRequest req(uint16_t who, uint32_t addr, bool low = false) {
    MemRequest r;
    r.requester = who;
    r.address = addr;
    r.low_priority = low;
    return r;
}

TEST(Tcdm, BankOf) {
    Tcdm t;
    EXPECT_EQ(t.bank_of(0x0000), 0u);
    EXPECT_EQ(t.bank_of(0x0080), 0u);
    EXPECT_EQ(t.bank_of(0x0044), 17u);
    EXPECT_THROW(t.bank_of(0x0042), Error);
    EXPECT_THROW(t.bank_of(0x10000), Error);
}

TEST(Tcdm, FreshMemoryIsZero) {
    Tcdm t;
    for (uint32_t a = 0; a < t.config().size_bytes; a += 4) {
        ASSERT_EQ(t.read_word(a), 0u);
    }
}

TEST(Tcdm, WriteReadRoundTrip) {
    Tcdm t;
    t.write(0x1234 & ~3u, F32::from_bits(0x80000001u));
    EXPECT_EQ(t.read(0x1234 & ~3u).bits, 0x80000001u);
    EXPECT_THROW(t.write_word(0x10000, 1), Error);
}

TEST(Tcdm, ImageRoundTrip) {
    Tcdm t;
    for (uint32_t a = 0; a < 4096; a += 4) {
        t.write_word(a, a * 2654435761u);
    }
    const auto path = std::filesystem::temp_directory_path() / "ntx_tcdm_image.bin";
    t.save_image(path.string());
    Tcdm u;
    u.load_image(path.string());
    std::filesystem::remove(path);
    EXPECT_TRUE(std::equal(t.words().begin(), t.words().end(), u.words().begin()));
}

TEST(TcdmConfig, RejectsBadGeometry) {
    TcdmConfig cfg;
    cfg.size_bytes = 1000;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.banks = 0;
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(Arbiter, DistinctBanksBothGranted) {
    Tcdm t;
    const MemRequest r[] = {req(0, 0x0), req(1, 0x4)};
    uint8_t g[2];
    t.arbitrate(r, g);
    EXPECT_EQ(g[0] + g[1], 2);
}

TEST(Arbiter, SameBankOneDeferred) {
    Tcdm t;
    const MemRequest r[] = {req(0, 0x0), req(1, 0x80)};
    uint8_t g[2];
    t.arbitrate(r, g);
    EXPECT_EQ(g[0] + g[1], 1);
    EXPECT_EQ(t.stats().conflicts, 1u);
    EXPECT_DOUBLE_EQ(t.stats().conflict_probability(), 0.5);
}

TEST(Arbiter, RoundRobinAlternates) {
    Tcdm t;
    const MemRequest r[] = {req(0, 0x0), req(1, 0x80)};
    int wins0 = 0;
    for (int i = 0; i < 100; ++i) {
        uint8_t g[2];
        t.arbitrate(r, g);
        wins0 += g[0];
    }
    EXPECT_EQ(wins0, 50);
}

TEST(Arbiter, HighPriorityBeatsLow) {
    Tcdm t;
    for (int i = 0; i < 10; ++i) {
        const MemRequest r[] = {req(960, 0x0, true), req(1, 0x80)};
        uint8_t g[2];
        t.arbitrate(r, g);
        EXPECT_EQ(g[0], 0);
        EXPECT_EQ(g[1], 1);
    }
    EXPECT_EQ(t.stats().low_deferred, 10u);
    EXPECT_EQ(t.stats().conflicts, 0u);
}

TEST(Arbiter, GrantsPlusDeferralsEqualRequests) {
    std::mt19937 rng(1);
    Tcdm t;
    std::vector<MemRequest> r;
    std::vector<uint8_t> g;
    for (int cyc = 0; cyc < 1000; ++cyc) {
        r.clear();
        const int n = static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            r.push_back(req(static_cast<uint16_t>(i), 4 * (rng() % 16384), i % 5 == 0));
        }
        g.assign(r.size(), 0);
        t.arbitrate(r, g);
        std::vector<int> per_bank(32, 0);
        for (size_t i = 0; i < r.size(); ++i) {
            per_bank[t.bank_of(r[i].address)] += g[i];
        }
        for (int b : per_bank) {
            ASSERT_LE(b, 1);
        }
    }
    const auto& s = t.stats();
    EXPECT_EQ(s.grants + s.conflicts, s.requests);
    EXPECT_EQ(s.low_grants + s.low_deferred, s.low_requests);
}

TEST(Arbiter, UniformConflictRateMatchesOccupancy) {
    // 16 requests into 32 banks: the number of granted requests equals the
    // number of occupied banks, 32 (1 - (31/32)^16) in expectation.
    constexpr int kReq = 16, kBanks = 32, kCycles = 100000;
    const double occupied = kBanks * (1.0 - std::pow(1.0 - 1.0 / kBanks, kReq));
    const double expect = 1.0 - occupied / kReq;

    std::mt19937_64 rng(2024);
    BankArbiter arb(kBanks);
    std::vector<MemRequest> r(kReq);
    std::vector<uint32_t> banks(kReq);
    std::vector<uint8_t> g(kReq);
    for (int cyc = 0; cyc < kCycles; ++cyc) {
        for (int i = 0; i < kReq; ++i) {
            banks[i] = static_cast<uint32_t>(rng() % kBanks);
            r[i] = req(static_cast<uint16_t>(i), 4 * banks[i]);
        }
        arb.arbitrate(r, banks, g);
    }
    // standard error is about 1e-4 at this sample size
    EXPECT_NEAR(arb.stats().conflict_probability(), expect, 2e-3);
}

}  // namespace
}  // namespace ntx
