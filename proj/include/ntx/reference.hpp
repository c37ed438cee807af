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

// Scalar reference kernels. They follow the same reduction blocking as the
// lowered programs so that a single-rounding accumulator reproduces the
// simulated output bit for bit.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ntx/f32.hpp"
#include "ntx/kernels.hpp"
#include "ntx/wide_fpu.hpp"

namespace ntx::ref {

// Acc needs init_zero(), init(F32), mac(F32, F32) and F32 round() const.

inline F32 f(float v) { return F32::from_float(v); }

template <class Acc>
std::vector<float> axpy(const KernelSpec& s, const std::vector<float>& x, const std::vector<float>& y) {
    std::vector<float> out(s.n);
    Acc acc;
    for (uint64_t i = 0; i < s.n; ++i) {
        acc.init(f(y[i]));
        acc.mac(f(x[i]), f(s.alpha));
        out[i] = acc.round().to_float();
    }
    return out;
}

template <class Acc>
std::vector<float> gemv(const KernelSpec& s, const std::vector<float>& A, const std::vector<float>& x) {
    const uint64_t cb = s.block_k != 0 ? s.block_k : s.n;
    std::vector<float> out(s.m);
    Acc acc;
    for (uint64_t r = 0; r < s.m; ++r) {
        acc.init_zero();
        for (uint64_t c0 = 0; c0 < s.n; c0 += cb) {
            if (c0 > 0) {
                acc.init(f(out[r]));
            }
            for (uint64_t c = c0; c < std::min(s.n, c0 + cb); ++c) {
                acc.mac(f(A[r * s.n + c]), f(x[c]));
            }
            out[r] = acc.round().to_float();
        }
    }
    return out;
}

template <class Acc>
std::vector<float> gemm(const KernelSpec& s, const std::vector<float>& A, const std::vector<float>& B,
                        const std::vector<float>& C) {
    const uint64_t bk = s.block_k != 0 ? s.block_k : s.k;
    std::vector<float> out = C;
    Acc acc;
    for (uint64_t i = 0; i < s.m; ++i) {
        for (uint64_t j = 0; j < s.n; ++j) {
            float& c = out[i * s.n + j];
            for (uint64_t k0 = 0; k0 < s.k; k0 += bk) {
                acc.init(f(c));
                for (uint64_t k = k0; k < std::min(s.k, k0 + bk); ++k) {
                    acc.mac(f(A[i * s.k + k]), f(B[k * s.n + j]));
                }
                c = acc.round().to_float();
            }
        }
    }
    return out;
}

// Channels-last layout: in[h][w][ci], wt[co][ky][kx][ci], out[oy][ox][co].
template <class Acc>
std::vector<float> conv2d(const KernelSpec& s, const std::vector<float>& in, const std::vector<float>& wt) {
    const uint32_t k = s.ksize, oh = s.h - k + 1, ow = s.w - k + 1;
    std::vector<float> out(uint64_t{oh} * ow * s.c_out);
    Acc acc;
    for (uint32_t oy = 0; oy < oh; ++oy) {
        for (uint32_t ox = 0; ox < ow; ++ox) {
            for (uint32_t co = 0; co < s.c_out; ++co) {
                acc.init_zero();
                for (uint32_t ky = 0; ky < k; ++ky) {
                    for (uint32_t kx = 0; kx < k; ++kx) {
                        for (uint32_t ci = 0; ci < s.c_in; ++ci) {
                            const uint64_t ii = ((uint64_t{oy} + ky) * s.w + ox + kx) * s.c_in + ci;
                            const uint64_t wi = ((uint64_t{co} * k + ky) * k + kx) * s.c_in + ci;
                            acc.mac(f(in[ii]), f(wt[wi]));
                        }
                    }
                }
                out[(uint64_t{oy} * ow + ox) * s.c_out + co] = acc.round().to_float();
            }
        }
    }
    return out;
}

// Laplace stencils: x taps first, then the y and z neighbour pairs, one rounding per pass.
template <class Acc>
std::vector<float> laplace(const KernelSpec& s, const std::vector<float>& u) {
    const int dims = s.kind == KernelKind::Laplace1d ? 1 : (s.kind == KernelKind::Laplace2d ? 2 : 3);
    const uint64_t W = s.w, H = dims >= 2 ? s.h : 1, D = dims == 3 ? s.d : 1;
    const uint64_t ow = W - 2, oh = dims >= 2 ? H - 2 : 1, od = dims == 3 ? D - 2 : 1;
    const int zy = dims >= 2 ? 1 : 0, zz = dims == 3 ? 1 : 0;
    const float center = -2.0f * static_cast<float>(dims);
    auto at = [&](uint64_t z, uint64_t y, uint64_t x) { return f(u[(z * H + y) * W + x]); };
    std::vector<float> out(od * oh * ow);
    Acc acc;
    for (uint64_t z = 0; z < od; ++z) {
        for (uint64_t y = 0; y < oh; ++y) {
            for (uint64_t x = 0; x < ow; ++x) {
                const uint64_t cz = z + zz, cy = y + zy, cx = x + 1;
                acc.init_zero();
                acc.mac(at(cz, cy, cx - 1), f(1.0f));
                acc.mac(at(cz, cy, cx), f(center));
                acc.mac(at(cz, cy, cx + 1), f(1.0f));
                F32 v = acc.round();
                if (dims >= 2) {
                    acc.init(v);
                    acc.mac(at(cz, cy - 1, cx), f(1.0f));
                    acc.mac(at(cz, cy + 1, cx), f(1.0f));
                    v = acc.round();
                }
                if (dims == 3) {
                    acc.init(v);
                    acc.mac(at(cz - 1, cy, cx), f(1.0f));
                    acc.mac(at(cz + 1, cy, cx), f(1.0f));
                    v = acc.round();
                }
                out[(z * oh + y) * ow + x] = v.to_float();
            }
        }
    }
    return out;
}

// One explicit step of the fourth-order diffusion update u - nu * (biharmonic u).
template <class Acc>
std::vector<float> diffusion(const KernelSpec& s, const std::vector<float>& u) {
    const uint64_t W = s.w, H = s.h, ow = W - 4, oh = H - 4;
    const float nu = s.nu;
    const float box[3][3] = {{-2.0f * nu, 8.0f * nu, -2.0f * nu},
                             {8.0f * nu, 1.0f - 20.0f * nu, 8.0f * nu},
                             {-2.0f * nu, 8.0f * nu, -2.0f * nu}};
    auto at = [&](uint64_t y, uint64_t x) { return f(u[y * W + x]); };
    std::vector<float> out(oh * ow);
    Acc acc;
    for (uint64_t y = 0; y < oh; ++y) {
        for (uint64_t x = 0; x < ow; ++x) {
            const uint64_t cy = y + 2, cx = x + 2;
            acc.init_zero();
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    acc.mac(at(cy + dy, cx + dx), f(box[dy + 1][dx + 1]));
                }
            }
            acc.init(acc.round());
            acc.mac(at(cy, cx - 2), f(-nu));
            acc.mac(at(cy, cx + 2), f(-nu));
            acc.init(acc.round());
            acc.mac(at(cy - 2, cx), f(-nu));
            acc.mac(at(cy + 2, cx), f(-nu));
            out[y * ow + x] = acc.round().to_float();
        }
    }
    return out;
}

/// Dispatches on the kind. `spec` should carry the planner's block sizes.
template <class Acc>
std::vector<float> run(const KernelSpec& s, const KernelInputs& in) {
    switch (s.kind) {
    case KernelKind::Axpy:
        return axpy<Acc>(s, in.at("x"), in.at("y"));
    case KernelKind::Gemv:
        return gemv<Acc>(s, in.at("A"), in.at("x"));
    case KernelKind::Gemm:
        return gemm<Acc>(s, in.at("A"), in.at("B"), in.at("C"));
    case KernelKind::Conv2d:
        return conv2d<Acc>(s, in.at("in"), in.at("wt"));
    case KernelKind::Diffusion:
        return diffusion<Acc>(s, in.at("u"));
    default:
        return laplace<Acc>(s, in.at("u"));
    }
}

/// Sequential binary32 fused multiply-add, one rounding per step.
struct Fma32Accumulator {
    float v = 0.0f;
    void init_zero() { v = 0.0f; }
    void init(F32 seed) { v = seed.to_float(); }
    void mac(F32 a, F32 b) { v = std::fma(a.to_float(), b.to_float(), v); }
    F32 round() const { return F32::from_float(v); }
};

}  // namespace ntx::ref
