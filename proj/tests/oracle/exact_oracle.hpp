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

// Arbitrary-precision reference accumulator. Sums are kept as GMP integers
// scaled by 2^298 (the weight of the smallest product of two subnormals),
// and rounded once to binary32 with MPFR.

#pragma once

#include <cstdint>

#include <gmp.h>

#include "ntx/f32.hpp"

namespace ntx::oracle {

class ExactAccumulator {
public:
    ExactAccumulator();
    ~ExactAccumulator();
    ExactAccumulator(const ExactAccumulator&) = delete;
    ExactAccumulator& operator=(const ExactAccumulator&) = delete;

    void init_zero();
    void init(F32 seed);
    void mac(F32 a, F32 b);
    F32 round() const;

private:
    void add_term(bool negative, uint64_t magnitude, int exponent);

    mpz_t sum_;
    mpz_t term_;
    bool nan_ = false;
};

/// Correct binary32 rounding (nearest, ties to even) of mantissa * 2^exponent.
uint32_t round_to_binary32(const mpz_t mantissa, long exponent);

}  // namespace ntx::oracle
