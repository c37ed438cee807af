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

#include "ntx/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "ntx/error.hpp"

namespace ntx {

namespace {

constexpr uint32_t kBanks = 32;
constexpr uint64_t kExtAlign = 64;

uint32_t ceil_div(uint64_t a, uint64_t b) { return static_cast<uint32_t>((a + b - 1) / b); }

/// Smallest p >= x with p mod 32 == residue.
uint32_t pad_to(uint32_t x, uint32_t residue) {
    uint32_t p = x;
    while (p % kBanks != residue % kBanks) {
        ++p;
    }
    return p;
}

struct Part {
    uint32_t start = 0;
    uint32_t count = 0;
};

std::vector<Part> split(uint32_t total, uint32_t parts) {
    std::vector<Part> out;
    uint32_t start = 0;
    for (uint32_t i = 0; i < parts; ++i) {
        const uint32_t c = total / parts + (i < total % parts ? 1 : 0);
        out.push_back({start, c});
        start += c;
    }
    return out;
}

class Allocator {
public:
    Allocator(uint32_t limit_words, std::vector<TcdmBuffer>& out) : limit_(limit_words), out_(out) {}

    /// Returns a byte offset; the first word lands on `bank`.
    uint32_t alloc(const std::string& name, uint32_t words, uint32_t bank = 0) {
        uint32_t start = next_;
        while (start % kBanks != bank % kBanks) {
            ++start;
        }
        if (uint64_t{start} + words > limit_) {
            std::ostringstream os;
            os << "buffer '" << name << "' (" << words << " words) does not fit the TCDM: " << start
               << " words already used of " << limit_;
            fail(ErrorCode::PlanningError, os.str());
        }
        next_ = start + words;
        out_.push_back({name, start * 4, words});
        return start * 4;
    }
    uint32_t used() const { return next_; }

private:
    uint32_t limit_;
    uint32_t next_ = 0;
    std::vector<TcdmBuffer>& out_;
};

class ExtLayout {
public:
    const ExtArray& add(const std::string& name, std::vector<uint64_t> shape) {
        ExtArray a{name, next_, std::move(shape)};
        next_ += (a.elements() * 4 + kExtAlign - 1) / kExtAlign * kExtAlign;
        arrays_.push_back(a);
        return arrays_.back();
    }
    uint64_t bytes() const { return next_; }
    std::vector<ExtArray>& arrays() { return arrays_; }

private:
    uint64_t next_ = 0;
    std::vector<ExtArray> arrays_;
};

AguConfig agu(uint32_t base, const std::vector<int64_t>& coeff_bytes, const std::vector<uint32_t>& counts) {
    return compile_affine(base, coeff_bytes, counts);
}

NtxCommand mac(const std::vector<uint32_t>& counts, int reduce_level, InitSource src, AguConfig a0, AguConfig a1,
               AguConfig a2) {
    NtxCommand c;
    c.opcode = FpuOpcode::Mac;
    for (size_t i = 0; i < counts.size(); ++i) {
        c.counts[i] = counts[i];
    }
    c.outer_level = static_cast<int>(counts.size()) - 1;
    c.init_level = reduce_level;
    c.store_level = reduce_level;
    c.init_source = src;
    c.agu = {a0, a1, a2};
    return c;
}

DmaJob job(DmaDirection dir, uint64_t ext, uint32_t tcdm, uint32_t width_words, uint32_t rows, uint64_t ext_pitch_words,
           uint32_t tcdm_pitch_words) {
    DmaJob j;
    j.direction = dir;
    j.ext_base = ext;
    j.tcdm_base = tcdm;
    j.width_bytes = width_words * 4;
    j.rows = rows;
    j.ext_stride = rows > 1 ? ext_pitch_words * 4 : j.width_bytes;
    j.tcdm_stride = rows > 1 ? tcdm_pitch_words * 4 : j.width_bytes;
    return j;
}

uint32_t even_tile(uint32_t extent, uint32_t max_tile) {
    const uint32_t tiles = ceil_div(extent, std::max(1u, max_tile));
    return ceil_div(extent, tiles);
}

struct Lowering {
    const ClusterConfig& cfg;
    KernelSpec spec;
    LoweredKernel out;
    ExtLayout ext;
    uint32_t words;
    uint32_t nx;

    Lowering(const ClusterConfig& c, const KernelSpec& s)
        : cfg(c), spec(s), words(c.tcdm.size_bytes / 4), nx(c.n_ntx) {}
};

// y = alpha * x + y, MAC with the accumulator seeded from y.
void lower_axpy(Lowering& L) {
    auto& s = L.spec;
    const auto& x = L.ext.add("x", {s.n});
    const auto& y = L.ext.add("y", {s.n});
    const auto& al = L.ext.add("alpha_rep", {L.nx});
    L.out.constants["alpha_rep"] = std::vector<float>(L.nx, s.alpha);
    const uint64_t xo = x.offset, yo = y.offset, ao = al.offset;

    const uint32_t fit = (L.words - L.nx - 4 * kBanks) / 4;
    uint32_t T = s.tile_x != 0 ? s.tile_x : static_cast<uint32_t>(std::min<uint64_t>(s.n, fit / 64 * 64));
    T = std::max(1u, T);
    s.tile_x = T;
    Allocator a(L.words, L.out.plan.buffers);
    const uint32_t alpha = a.alloc("alpha", L.nx, 0);
    const uint32_t xb[2] = {a.alloc("x0", T, 0), a.alloc("x1", T, 0)};
    const uint32_t yb[2] = {a.alloc("y0", T, 16), a.alloc("y1", T, 16)};

    const uint64_t tiles = (s.n + T - 1) / T;
    for (uint64_t t = 0; t < tiles; ++t) {
        const uint64_t t0 = t * T;
        const auto c = static_cast<uint32_t>(std::min<uint64_t>(T, s.n - t0));
        const int b = static_cast<int>(t % 2);
        Tile tile;
        if (t == 0) {
            tile.loads.push_back(job(DmaDirection::In, ao, alpha, L.nx, 1, 0, 0));
        }
        tile.loads.push_back(job(DmaDirection::In, xo + 4 * t0, xb[b], c, 1, 0, 0));
        tile.loads.push_back(job(DmaDirection::In, yo + 4 * t0, yb[b], c, 1, 0, 0));
        std::vector<TileCommand> g;
        const auto parts = split(c, L.nx);
        for (uint32_t f = 0; f < L.nx; ++f) {
            if (parts[f].count == 0) {
                continue;
            }
            const std::vector<uint32_t> counts{1, parts[f].count};
            g.push_back({static_cast<int>(f),
                         mac(counts, 0, InitSource::Memory, agu(xb[b] + 4 * parts[f].start, {0, 4}, counts),
                             agu(alpha + 4 * f, {0, 0}, counts), agu(yb[b] + 4 * parts[f].start, {0, 4}, counts))});
        }
        tile.groups.push_back(std::move(g));
        tile.stores.push_back(job(DmaDirection::Out, yo + 4 * t0, yb[b], c, 1, 0, 0));
        L.out.plan.tiles.push_back(std::move(tile));
    }
    L.out.output = "y";
}

// y = A x, one output row per NTX, column blocks chained through memory seeds.
void lower_gemv(Lowering& L) {
    auto& s = L.spec;
    const auto& A = L.ext.add("A", {s.m, s.n});
    const auto& x = L.ext.add("x", {s.n});
    const auto& y = L.ext.add("y", {s.m});
    const uint64_t Ao = A.offset, xo = x.offset, yo = y.offset;
    const uint32_t R = static_cast<uint32_t>(std::min<uint64_t>(s.m, L.nx));
    const bool resident = s.n <= L.words / 4;
    const int64_t budget = static_cast<int64_t>(L.words) - 2 * R - 4 * kBanks - (resident ? static_cast<int64_t>(s.n) : 0);
    const int64_t per_col = 2 * static_cast<int64_t>(R) + (resident ? 0 : 2);
    int64_t cb_max = budget / per_col - kBanks;
    if (cb_max < 1) {
        fail(ErrorCode::PlanningError, "GEMV row block does not fit the TCDM");
    }
    uint32_t cb = s.block_k != 0 ? s.block_k : even_tile(static_cast<uint32_t>(s.n), static_cast<uint32_t>(cb_max));
    cb = static_cast<uint32_t>(std::min<uint64_t>(cb, s.n));
    s.block_k = cb;
    const uint32_t pitch = pad_to(cb, 4);

    Allocator a(L.words, L.out.plan.buffers);
    const uint32_t xr = resident ? a.alloc("x", static_cast<uint32_t>(s.n), 0) : 0;
    const uint32_t Ab[2] = {a.alloc("A0", R * pitch, 0), a.alloc("A1", R * pitch, 0)};
    uint32_t xb[2] = {0, 0};
    if (!resident) {
        xb[0] = a.alloc("x0", cb, 2);
        xb[1] = a.alloc("x1", cb, 2);
    }
    const uint32_t yb[2] = {a.alloc("y0", R, 20), a.alloc("y1", R, 20)};

    const uint64_t row_blocks = (s.m + R - 1) / R;
    const uint64_t col_blocks = (s.n + cb - 1) / cb;
    uint64_t t = 0;
    for (uint64_t rb = 0; rb < row_blocks; ++rb) {
        const uint64_t r0 = rb * R;
        const auto rr = static_cast<uint32_t>(std::min<uint64_t>(R, s.m - r0));
        const int ob = static_cast<int>(rb % 2);
        for (uint64_t cbi = 0; cbi < col_blocks; ++cbi, ++t) {
            const uint64_t c0 = cbi * cb;
            const auto cl = static_cast<uint32_t>(std::min<uint64_t>(cb, s.n - c0));
            const int b = static_cast<int>(t % 2);
            Tile tile;
            if (t == 0 && resident) {
                tile.loads.push_back(job(DmaDirection::In, xo, xr, static_cast<uint32_t>(s.n), 1, 0, 0));
            }
            tile.loads.push_back(job(DmaDirection::In, Ao + 4 * (r0 * s.n + c0), Ab[b], cl, rr, s.n, pitch));
            if (!resident) {
                tile.loads.push_back(job(DmaDirection::In, xo + 4 * c0, xb[b], cl, 1, 0, 0));
            }
            const uint32_t xaddr = resident ? xr + static_cast<uint32_t>(4 * c0) : xb[b];
            std::vector<TileCommand> g;
            for (uint32_t i = 0; i < rr; ++i) {
                const std::vector<uint32_t> counts{cl};
                g.push_back({static_cast<int>(i),
                             mac(counts, 0, cbi == 0 ? InitSource::Zero : InitSource::Memory,
                                 agu(Ab[b] + 4 * i * pitch, {4}, counts), agu(xaddr, {4}, counts),
                                 agu(yb[ob] + 4 * i, {0}, counts))});
            }
            tile.groups.push_back(std::move(g));
            if (cbi + 1 == col_blocks) {
                tile.stores.push_back(job(DmaDirection::Out, yo + 4 * r0, yb[ob], rr, 1, 0, 0));
            }
            L.out.plan.tiles.push_back(std::move(tile));
        }
    }
    L.out.output = "y";
}

// C += A B with a resident C block per output block and k-blocked panels.
void lower_gemm(Lowering& L) {
    auto& s = L.spec;
    const auto& A = L.ext.add("A", {s.m, s.k});
    const auto& B = L.ext.add("B", {s.k, s.n});
    const auto& C = L.ext.add("C", {s.m, s.n});
    const uint64_t Ao = A.offset, Bo = B.offset, Co = C.offset;
    const uint32_t b = s.block != 0 ? s.block : 32;
    const uint32_t bk = s.block_k != 0 ? s.block_k : 64;
    s.block = b;
    s.block_k = bk;
    const uint32_t bm = static_cast<uint32_t>(std::min<uint64_t>(b, s.m));
    const uint32_t bn = static_cast<uint32_t>(std::min<uint64_t>(b, s.n));
    const uint32_t bkk = static_cast<uint32_t>(std::min<uint64_t>(bk, s.k));
    const uint32_t pA = pad_to(bkk, 8);
    const uint32_t pB = pad_to(bn, 1);
    const uint32_t pC = pad_to(bn, 1);

    Allocator a(L.words, L.out.plan.buffers);
    const uint32_t Ab[2] = {a.alloc("A0", bm * pA, 0), a.alloc("A1", bm * pA, 0)};
    const uint32_t Bb[2] = {a.alloc("B0", bkk * pB, 16), a.alloc("B1", bkk * pB, 16)};
    const uint32_t Cb[2] = {a.alloc("C0", bm * pC, 8), a.alloc("C1", bm * pC, 8)};

    uint64_t t = 0;
    uint64_t o = 0;
    for (uint64_t i0 = 0; i0 < s.m; i0 += b) {
        const auto bh = static_cast<uint32_t>(std::min<uint64_t>(b, s.m - i0));
        for (uint64_t j0 = 0; j0 < s.n; j0 += b, ++o) {
            const auto bw = static_cast<uint32_t>(std::min<uint64_t>(b, s.n - j0));
            const int ob = static_cast<int>(o % 2);
            for (uint64_t k0 = 0; k0 < s.k; k0 += bk, ++t) {
                const auto kl = static_cast<uint32_t>(std::min<uint64_t>(bk, s.k - k0));
                const int tb = static_cast<int>(t % 2);
                Tile tile;
                if (k0 == 0) {
                    tile.loads.push_back(job(DmaDirection::In, Co + 4 * (i0 * s.n + j0), Cb[ob], bw, bh, s.n, pC));
                }
                tile.loads.push_back(job(DmaDirection::In, Ao + 4 * (i0 * s.k + k0), Ab[tb], kl, bh, s.k, pA));
                tile.loads.push_back(job(DmaDirection::In, Bo + 4 * (k0 * s.n + j0), Bb[tb], bw, kl, s.n, pB));
                std::vector<TileCommand> g;
                const auto parts = split(bh, L.nx);
                for (uint32_t f = 0; f < L.nx; ++f) {
                    if (parts[f].count == 0) {
                        continue;
                    }
                    const std::vector<uint32_t> counts{kl, bw, parts[f].count};
                    const uint32_t r0 = parts[f].start;
                    g.push_back({static_cast<int>(f),
                                 mac(counts, 0, InitSource::Memory, agu(Ab[tb] + 4 * r0 * pA, {4, 0, 4 * pA}, counts),
                                     agu(Bb[tb], {4 * pB, 4, 0}, counts),
                                     agu(Cb[ob] + 4 * r0 * pC, {0, 4, 4 * pC}, counts))});
                }
                tile.groups.push_back(std::move(g));
                if (k0 + bk >= s.k) {
                    tile.stores.push_back(job(DmaDirection::Out, Co + 4 * (i0 * s.n + j0), Cb[ob], bw, bh, s.n, pC));
                }
                L.out.plan.tiles.push_back(std::move(tile));
            }
        }
    }
    L.out.output = "C";
}

// Channels-last convolution layer; output channel co is one command unit.
void lower_conv(Lowering& L) {
    auto& s = L.spec;
    const uint32_t k = s.ksize, ci = s.c_in, co = s.c_out;
    const uint32_t oh = s.h - k + 1, ow = s.w - k + 1;
    const auto& in = L.ext.add("in", {s.h, s.w, ci});
    const auto& wt = L.ext.add("wt", {co, k, k, ci});
    const auto& out = L.ext.add("out", {oh, ow, co});
    const uint64_t io = in.offset, wo = wt.offset, oo = out.offset;
    const uint32_t wlen = k * k * ci;
    // every row pitch skews one bank against the previous row
    const uint32_t wpitch = pad_to(wlen, 1);
    const uint32_t wwords = co * wpitch;

    auto in_pitch = [&](uint32_t tw) { return pad_to((tw + k - 1) * ci, 1); };
    auto out_pitch = [&](uint32_t tw) { return pad_to(tw * co, 1); };
    auto fits = [&](uint32_t th, uint32_t tw) {
        const uint64_t need = uint64_t{wwords} + 2ULL * (th + k - 1) * in_pitch(tw) + 2ULL * th * out_pitch(tw) +
                              4 * kBanks;
        return need <= L.words;
    };
    uint32_t th = s.tile_y, tw = s.tile_x;
    if (th == 0 || tw == 0) {
        uint32_t T = std::max(oh, ow);
        while (T > 1 && !fits(std::min(T, oh), std::min(T, ow))) {
            --T;
        }
        th = even_tile(oh, std::min(T, oh));
        tw = even_tile(ow, std::min(T, ow));
    }
    th = std::min(th, oh);
    tw = std::min(tw, ow);
    if (!fits(th, tw)) {
        fail(ErrorCode::PlanningError, "convolution tile does not fit the TCDM");
    }
    s.tile_y = th;
    s.tile_x = tw;
    const uint32_t pin = in_pitch(tw), pout = out_pitch(tw);

    Allocator a(L.words, L.out.plan.buffers);
    const uint32_t wb = a.alloc("wt", wwords, 0);
    const uint32_t ib[2] = {a.alloc("in0", (th + k - 1) * pin, 0), a.alloc("in1", (th + k - 1) * pin, 0)};
    const uint32_t ob[2] = {a.alloc("out0", th * pout, 0), a.alloc("out1", th * pout, 0)};

    uint64_t t = 0;
    for (uint32_t y0 = 0; y0 < oh; y0 += th) {
        const uint32_t tth = std::min(th, oh - y0);
        for (uint32_t x0 = 0; x0 < ow; x0 += tw, ++t) {
            const uint32_t ttw = std::min(tw, ow - x0);
            const int b = static_cast<int>(t % 2);
            Tile tile;
            if (t == 0) {
                tile.loads.push_back(job(DmaDirection::In, wo, wb, wlen, co, wlen, wpitch));
            }
            tile.loads.push_back(job(DmaDirection::In, io + 4ULL * (uint64_t{y0} * s.w + x0) * ci, ib[b],
                                     (ttw + k - 1) * ci, tth + k - 1, uint64_t{s.w} * ci, pin));
            struct Unit {
                uint32_t ch, r0, rows;
            };
            std::vector<Unit> units;
            const uint32_t per_ch = std::max(1u, L.nx / co);
            for (uint32_t c = 0; c < co; ++c) {
                for (const Part& p : split(tth, per_ch)) {
                    if (p.count > 0) {
                        units.push_back({c, p.start, p.count});
                    }
                }
            }
            const size_t ngroups = (units.size() + L.nx - 1) / L.nx;
            tile.groups.resize(ngroups);
            for (size_t u = 0; u < units.size(); ++u) {
                const Unit& un = units[u];
                const std::vector<uint32_t> counts{ci, k, k, ttw, un.rows};
                const NtxCommand cmd =
                    mac(counts, 2, InitSource::Zero,
                        agu(ib[b] + 4 * un.r0 * pin, {4, 4 * ci, 4 * pin, 4 * ci, 4 * pin}, counts),
                        agu(wb + 4 * un.ch * wpitch, {4, 4 * ci, 4 * k * ci, 0, 0}, counts),
                        agu(ob[b] + 4 * (un.r0 * pout + un.ch), {0, 0, 0, 4 * co, 4 * pout}, counts));
                tile.groups[u / L.nx].push_back({static_cast<int>(u % L.nx), cmd});
            }
            tile.stores.push_back(job(DmaDirection::Out, oo + 4ULL * (uint64_t{y0} * ow + x0) * co, ob[b], ttw * co,
                                      tth, uint64_t{ow} * co, pout));
            L.out.plan.tiles.push_back(std::move(tile));
        }
    }
    L.out.output = "out";
}

struct Tap {
    uint32_t count;
    int dz, dy, dx;  // offset step per tap index
};

struct Pass {
    int z0, y0, x0;          // first tap offset relative to the output point
    std::vector<Tap> taps;   // tap loop levels, innermost first
    std::vector<float> coeff;
};

int stencil_dims(KernelKind k) {
    switch (k) {
    case KernelKind::Laplace1d:
        return 1;
    case KernelKind::Laplace3d:
        return 3;
    default:
        return 2;
    }
}

uint32_t stencil_halo(KernelKind k) { return k == KernelKind::Diffusion ? 2 : 1; }

std::vector<Pass> passes_for(const KernelSpec& s) {
    const float c1d = s.kind == KernelKind::Laplace1d ? -2.0f : (s.kind == KernelKind::Laplace2d ? -4.0f : -6.0f);
    switch (s.kind) {
    case KernelKind::Laplace1d:
    case KernelKind::Laplace2d:
    case KernelKind::Laplace3d: {
        std::vector<Pass> p;
        p.push_back({0, 0, -1, {{3, 0, 0, 1}}, {1.0f, c1d, 1.0f}});
        if (s.kind != KernelKind::Laplace1d) {
            p.push_back({0, -1, 0, {{2, 0, 2, 0}}, {1.0f, 1.0f}});
        }
        if (s.kind == KernelKind::Laplace3d) {
            p.push_back({-1, 0, 0, {{2, 2, 0, 0}}, {1.0f, 1.0f}});
        }
        return p;
    }
    case KernelKind::Diffusion: {
        const float nu = s.nu;
        const float axis = 8.0f * nu, diag = -2.0f * nu, far = -nu, center = 1.0f - 20.0f * nu;
        return {
            {0, -1, -1, {{3, 0, 0, 1}, {3, 0, 1, 0}}, {diag, axis, diag, axis, center, axis, diag, axis, diag}},
            {0, 0, -2, {{2, 0, 0, 4}}, {far, far}},
            {0, -2, 0, {{2, 0, 4, 0}}, {far, far}},
        };
    }
    default:
        return {};
    }
}

// Star and box stencils as chains of passes; later passes seed from the output.
void lower_stencil(Lowering& L) {
    auto& s = L.spec;
    const int dims = stencil_dims(s.kind);
    const uint32_t r = stencil_halo(s.kind);
    const uint32_t od = dims == 3 ? s.d - 2 * r : 1;
    const uint32_t oh = dims >= 2 ? s.h - 2 * r : 1;
    const uint32_t ow = s.w - 2 * r;
    std::vector<uint64_t> in_shape, out_shape;
    if (dims == 3) {
        in_shape = {s.d, s.h, s.w};
        out_shape = {od, oh, ow};
    } else if (dims == 2) {
        in_shape = {s.h, s.w};
        out_shape = {oh, ow};
    } else {
        in_shape = {s.w};
        out_shape = {ow};
    }
    const auto& u = L.ext.add("u", in_shape);
    const auto& o = L.ext.add("out", out_shape);
    const uint64_t uo = u.offset, oo = o.offset;

    const std::vector<Pass> passes = passes_for(s);
    std::vector<float> coef;
    std::vector<uint32_t> pass_off;
    for (const Pass& p : passes) {
        pass_off.push_back(static_cast<uint32_t>(coef.size()));
        coef.insert(coef.end(), p.coeff.begin(), p.coeff.end());
    }
    const uint32_t ntaps = static_cast<uint32_t>(coef.size());
    const uint32_t cpitch = ntaps | 1u;
    std::vector<float> rep(uint64_t{cpitch} * L.nx, 0.0f);
    for (uint32_t f = 0; f < L.nx; ++f) {
        std::copy(coef.begin(), coef.end(), rep.begin() + f * cpitch);
    }
    const auto& ca = L.ext.add("coef_rep", {rep.size()});
    const uint64_t co = ca.offset;
    L.out.constants["coef_rep"] = rep;

    const uint32_t cwords = cpitch * L.nx;
    auto in_words = [&](uint32_t tz, uint32_t ty, uint32_t tx) {
        const uint64_t pz = dims == 3 ? tz + 2 * r : 1;
        const uint64_t py = dims >= 2 ? ty + 2 * r : 1;
        return pz * py * (tx + 2 * r);
    };
    auto fits = [&](uint32_t tz, uint32_t ty, uint32_t tx) {
        return uint64_t{cwords} + 2 * in_words(tz, ty, tx) + 2ULL * tz * ty * tx + 4 * kBanks <= L.words;
    };
    uint32_t tz = s.tile_z, ty = s.tile_y, tx = s.tile_x;
    if (tx == 0 || (dims >= 2 && ty == 0) || (dims == 3 && tz == 0)) {
        double best = -1.0;
        uint64_t best_area = 0;
        const uint32_t zmax = dims == 3 ? std::min(od, 32u) : 1;
        const uint32_t ymax = dims >= 2 ? std::min(oh, 128u) : 1;
        for (uint32_t z = 1; z <= zmax; ++z) {
            for (uint32_t y = 1; y <= ymax; ++y) {
                uint32_t lo = 0, hi = ow;
                while (lo < hi) {
                    const uint32_t mid = (lo + hi + 1) / 2;
                    if (fits(z, y, mid)) {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                if (lo == 0) {
                    continue;
                }
                const uint32_t ez = even_tile(od, z), ey = even_tile(oh, y), ex = even_tile(ow, lo);
                const uint64_t area = uint64_t{ez} * ey * ex;
                const double score = static_cast<double>(area) / static_cast<double>(in_words(ez, ey, ex) + area);
                if (score > best + 1e-12 || (std::abs(score - best) <= 1e-12 && area > best_area)) {
                    best = score;
                    best_area = area;
                    tz = ez;
                    ty = ey;
                    tx = ex;
                }
            }
        }
        if (best < 0.0) {
            fail(ErrorCode::PlanningError, "stencil tile does not fit the TCDM");
        }
    }
    tz = dims == 3 ? std::min(tz, od) : 1;
    ty = dims >= 2 ? std::min(ty, oh) : 1;
    tx = std::min(tx, ow);
    if (!fits(tz, ty, tx)) {
        fail(ErrorCode::PlanningError, "stencil tile does not fit the TCDM");
    }
    s.tile_x = tx;
    s.tile_y = dims >= 2 ? ty : 0;
    s.tile_z = dims == 3 ? tz : 0;

    const uint32_t prow = tx + 2 * r;
    const uint32_t prows = dims >= 2 ? ty + 2 * r : 1;
    const uint32_t pplane = prow * prows;
    const uint32_t pz = dims == 3 ? tz + 2 * r : 1;
    Allocator a(L.words, L.out.plan.buffers);
    const uint32_t cb = a.alloc("coef", cwords, 0);
    const uint32_t ib[2] = {a.alloc("u0", pz * pplane, 0), a.alloc("u1", pz * pplane, 0)};
    const uint32_t obuf[2] = {a.alloc("out0", tz * ty * tx, 16), a.alloc("out1", tz * ty * tx, 16)};

    const uint64_t in_row = s.w;
    const uint64_t in_plane = uint64_t{s.w} * (dims >= 2 ? s.h : 1);
    uint64_t t = 0;
    for (uint32_t z0 = 0; z0 < od; z0 += tz) {
        const uint32_t ttz = std::min(tz, od - z0);
        for (uint32_t y0 = 0; y0 < oh; y0 += ty) {
            const uint32_t tty = std::min(ty, oh - y0);
            for (uint32_t x0 = 0; x0 < ow; x0 += tx, ++t) {
                const uint32_t ttx = std::min(tx, ow - x0);
                const int b = static_cast<int>(t % 2);
                // the tile buffers keep the planned pitches; partial tiles use a prefix
                Tile tile;
                if (t == 0) {
                    tile.loads.push_back(job(DmaDirection::In, co, cb, cwords, 1, 0, 0));
                }
                const uint32_t in_z = dims == 3 ? ttz + 2 * r : 1;
                const uint32_t in_y = dims >= 2 ? tty + 2 * r : 1;
                for (uint32_t zz = 0; zz < in_z; ++zz) {
                    tile.loads.push_back(job(DmaDirection::In,
                                             uo + 4 * ((uint64_t{z0} + zz) * in_plane + uint64_t{y0} * in_row + x0),
                                             ib[b] + 4 * zz * pplane, ttx + 2 * r, in_y, in_row, prow));
                }
                const uint32_t orow = tx;
                const uint32_t oplane = tx * ty;
                const std::vector<Part> parts =
                    dims == 1 ? split(ttx, L.nx) : split(tty, L.nx);
                for (size_t pi = 0; pi < passes.size(); ++pi) {
                    const Pass& p = passes[pi];
                    std::vector<TileCommand> g;
                    for (uint32_t f = 0; f < L.nx; ++f) {
                        if (parts[f].count == 0) {
                            continue;
                        }
                        std::vector<uint32_t> counts;
                        std::vector<int64_t> cin, ccoef, cout;
                        int64_t coef_step = 1;
                        for (const Tap& tp : p.taps) {
                            counts.push_back(tp.count);
                            cin.push_back(4 * (int64_t{tp.dz} * pplane + int64_t{tp.dy} * prow + tp.dx));
                            ccoef.push_back(4 * coef_step);
                            cout.push_back(0);
                            coef_step *= tp.count;
                        }
                        const int reduce = static_cast<int>(p.taps.size()) - 1;
                        uint32_t ox = 0, oy = 0;
                        if (dims == 1) {
                            ox = parts[f].start;
                            counts.push_back(parts[f].count);
                        } else {
                            oy = parts[f].start;
                            counts.push_back(ttx);
                            counts.push_back(parts[f].count);
                        }
                        cin.push_back(4);
                        ccoef.push_back(0);
                        cout.push_back(4);
                        if (dims >= 2) {
                            cin.push_back(4 * int64_t{prow});
                            ccoef.push_back(0);
                            cout.push_back(4 * int64_t{orow});
                        }
                        if (dims == 3) {
                            counts.push_back(ttz);
                            cin.push_back(4 * int64_t{pplane});
                            ccoef.push_back(0);
                            cout.push_back(4 * int64_t{oplane});
                        }
                        const int64_t in_base = int64_t{r + static_cast<uint32_t>(0)} * 0 +
                                                (dims == 3 ? (int64_t{r} + p.z0) * pplane : 0) +
                                                (dims >= 2 ? (int64_t{r} + oy + p.y0) * prow : 0) +
                                                (int64_t{r} + ox + p.x0);
                        const uint32_t out_base = obuf[b] + 4 * (oy * orow + ox);
                        g.push_back({static_cast<int>(f),
                                     mac(counts, reduce, pi == 0 ? InitSource::Zero : InitSource::Memory,
                                         agu(static_cast<uint32_t>(ib[b] + 4 * in_base), cin, counts),
                                         agu(cb + 4 * (f * cpitch + pass_off[pi]), ccoef, counts),
                                         agu(out_base, cout, counts))});
                    }
                    tile.groups.push_back(std::move(g));
                }
                for (uint32_t zz = 0; zz < ttz; ++zz) {
                    const uint64_t ext = oo + 4 * ((uint64_t{z0} + zz) * uint64_t{oh} * ow + uint64_t{y0} * ow + x0);
                    tile.stores.push_back(job(DmaDirection::Out, ext, obuf[b] + 4 * zz * oplane, ttx, tty, ow, orow));
                }
                L.out.plan.tiles.push_back(std::move(tile));
            }
        }
    }
    L.out.output = "out";
}

uint64_t estimate_compute(const Tile& tile, uint32_t n) {
    std::vector<uint64_t> per(n, 0);
    for (const auto& g : tile.groups) {
        for (const TileCommand& tc : g) {
            const NtxCommand& c = tc.cmd;
            uint64_t port2 = c.writes();
            if (c.init_source == InitSource::Memory) {
                port2 *= 2;
            }
            per[static_cast<size_t>(tc.ntx)] += std::max(c.points(), port2) + 8;
        }
    }
    return per.empty() ? 0 : *std::max_element(per.begin(), per.end());
}

uint64_t estimate_transfer(const Tile& tile, const ClusterConfig& cfg) {
    uint64_t bytes = 0;
    for (const DmaJob& j : tile.loads) {
        bytes += j.bytes();
    }
    for (const DmaJob& j : tile.stores) {
        bytes += j.bytes();
    }
    return 2 * ((bytes + cfg.dma.axi_bytes_per_cluster_cycle() - 1) / cfg.dma.axi_bytes_per_cluster_cycle());
}

}  // namespace

std::string_view kernel_kind_name(KernelKind kind) {
    switch (kind) {
    case KernelKind::Axpy:
        return "axpy";
    case KernelKind::Gemv:
        return "gemv";
    case KernelKind::Gemm:
        return "gemm";
    case KernelKind::Conv2d:
        return "conv2d";
    case KernelKind::Laplace1d:
        return "laplace1d";
    case KernelKind::Laplace2d:
        return "laplace2d";
    case KernelKind::Laplace3d:
        return "laplace3d";
    case KernelKind::Diffusion:
        return "diffusion";
    }
    return "unknown";
}

std::optional<KernelKind> kernel_kind_from_name(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(KernelKind::Diffusion); ++i) {
        const auto k = static_cast<KernelKind>(i);
        if (kernel_kind_name(k) == name) {
            return k;
        }
    }
    if (name == "lap1d") {
        return KernelKind::Laplace1d;
    }
    if (name == "lap2d") {
        return KernelKind::Laplace2d;
    }
    if (name == "lap3d") {
        return KernelKind::Laplace3d;
    }
    if (name == "diff") {
        return KernelKind::Diffusion;
    }
    if (name == "conv") {
        return KernelKind::Conv2d;
    }
    return std::nullopt;
}

void KernelSpec::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) {
            fail(ErrorCode::InvalidArgument, msg);
        }
    };
    constexpr uint64_t kMaxExtent = 1ULL << 31;
    switch (kind) {
    case KernelKind::Axpy:
        need(n >= 1 && n < kMaxExtent, "AXPY needs 1 <= n < 2^31");
        break;
    case KernelKind::Gemv:
        need(m >= 1 && n >= 1 && m * n < kMaxExtent, "GEMV needs positive m, n with m*n < 2^31");
        break;
    case KernelKind::Gemm:
        need(m >= 1 && n >= 1 && k >= 1, "GEMM needs positive m, n, k");
        need(m * k < kMaxExtent && k * n < kMaxExtent && m * n < kMaxExtent, "GEMM matrices too large");
        need(block == 0 || block >= 1, "GEMM block must be positive");
        break;
    case KernelKind::Conv2d:
        need(ksize >= 1 && ksize % 2 == 1 && ksize <= 15, "convolution kernel size must be odd and at most 15");
        need(h >= ksize && w >= ksize, "image smaller than the convolution kernel");
        need(c_in >= 1 && c_out >= 1 && c_in <= 256 && c_out <= 256, "channel counts must be in [1, 256]");
        break;
    case KernelKind::Laplace1d:
        need(w >= 3, "Laplace extent must be at least 3");
        break;
    case KernelKind::Laplace2d:
        need(w >= 3 && h >= 3, "Laplace extents must be at least 3");
        break;
    case KernelKind::Laplace3d:
        need(w >= 3 && h >= 3 && d >= 3, "Laplace extents must be at least 3");
        break;
    case KernelKind::Diffusion:
        need(w >= 5 && h >= 5, "diffusion extents must be at least 5");
        break;
    }
}

std::string KernelSpec::label() const {
    std::ostringstream os;
    os << kernel_kind_name(kind);
    switch (kind) {
    case KernelKind::Axpy:
        os << " n=" << n;
        break;
    case KernelKind::Gemv:
        os << " " << m << "x" << n;
        break;
    case KernelKind::Gemm:
        os << " " << m << "x" << n << "x" << k;
        break;
    case KernelKind::Conv2d:
        os << " k=" << ksize << " " << h << "x" << w << " c=" << c_in << "->" << c_out;
        break;
    case KernelKind::Laplace1d:
        os << " " << w;
        break;
    case KernelKind::Laplace3d:
        os << " " << d << "x" << h << "x" << w;
        break;
    default:
        os << " " << h << "x" << w;
        break;
    }
    return os.str();
}

uint64_t KernelSpec::flops() const {
    switch (kind) {
    case KernelKind::Axpy:
        return 2 * n;
    case KernelKind::Gemv:
        return 2 * m * n;
    case KernelKind::Gemm:
        return 2 * m * n * k;
    case KernelKind::Conv2d:
        return 2ULL * (h - ksize + 1) * (w - ksize + 1) * ksize * ksize * c_in * c_out;
    case KernelKind::Laplace1d:
        return 6ULL * (w - 2);
    case KernelKind::Laplace2d:
        return 10ULL * (w - 2) * (h - 2);
    case KernelKind::Laplace3d:
        return 14ULL * (w - 2) * (h - 2) * (d - 2);
    case KernelKind::Diffusion:
        return 26ULL * (w - 4) * (h - 4);
    }
    return 0;
}

uint64_t ExtArray::elements() const {
    uint64_t n = 1;
    for (uint64_t s : shape) {
        n *= s;
    }
    return n;
}

const ExtArray& LoweredKernel::array(const std::string& name) const {
    for (const ExtArray& a : ext_arrays) {
        if (a.name == name) {
            return a;
        }
    }
    fail(ErrorCode::InvalidArgument, "no external array named '" + name + "'");
}

std::vector<std::vector<float>> stencil_passes(const KernelSpec& spec) {
    std::vector<std::vector<float>> out;
    for (const Pass& p : passes_for(spec)) {
        out.push_back(p.coeff);
    }
    return out;
}

Program build_program(const TilingPlan& plan, const ClusterConfig& cfg) {
    Program p;
    const uint32_t n = cfg.n_ntx;
    constexpr size_t kRegs = reg::kBlockBytes / 4;
    std::vector<std::array<uint32_t, kRegs>> shadow(n);
    std::vector<std::array<bool, kRegs>> known(n);
    for (auto& k : known) {
        k.fill(false);
    }
    std::vector<uint64_t> issued(n, 0);
    uint32_t next_tag = 0;
    const size_t T = plan.tiles.size();
    std::vector<std::vector<uint32_t>> load_tags(T), store_tags(T);
    std::vector<std::vector<uint64_t>> retired_after(T);

    auto enqueue = [&](const std::vector<DmaJob>& jobs, std::vector<uint32_t>& tags) {
        for (const DmaJob& j : jobs) {
            p.dma(j, next_tag);
            tags.push_back(next_tag++);
        }
    };
    auto wait_dma = [&](const std::vector<uint32_t>& tags) {
        if (!tags.empty()) {
            action::Barrier b;
            b.dma_tags = tags;
            p.barrier(std::move(b));
        }
    };
    auto wait_retired = [&](const std::vector<uint64_t>& counts) {
        action::Barrier b;
        for (uint32_t i = 0; i < n; ++i) {
            if (counts[i] > 0) {
                b.retired.emplace_back(static_cast<int>(i), counts[i]);
            }
        }
        if (!b.retired.empty()) {
            p.barrier(std::move(b));
        }
    };
    auto configure = [&](const std::vector<TileCommand>& g) {
        std::vector<std::vector<RegisterWrite>> per(n);
        for (const TileCommand& tc : g) {
            const auto i = static_cast<size_t>(tc.ntx);
            for (const auto& [off, val] : encode_config(tc.cmd)) {
                if (!known[i][off / 4] || shadow[i][off / 4] != val) {
                    per[i].emplace_back(off, val);
                }
            }
        }
        if (g.size() == n && n > 1) {
            std::vector<RegisterWrite> common;
            for (const RegisterWrite& w : per[0]) {
                bool everywhere = true;
                for (uint32_t i = 1; i < n && everywhere; ++i) {
                    everywhere = std::find(per[i].begin(), per[i].end(), w) != per[i].end();
                }
                if (everywhere) {
                    common.push_back(w);
                }
            }
            if (!common.empty()) {
                for (auto& v : per) {
                    std::erase_if(v, [&](const RegisterWrite& w) {
                        return std::find(common.begin(), common.end(), w) != common.end();
                    });
                }
                for (uint32_t i = 0; i < n; ++i) {
                    for (const auto& [off, val] : common) {
                        shadow[i][off / 4] = val;
                        known[i][off / 4] = true;
                    }
                }
                p.configure(kBroadcast, std::move(common));
            }
        }
        for (uint32_t i = 0; i < n; ++i) {
            if (!per[i].empty()) {
                for (const auto& [off, val] : per[i]) {
                    shadow[i][off / 4] = val;
                    known[i][off / 4] = true;
                }
                p.configure(static_cast<int>(i), std::move(per[i]));
            }
        }
    };
    auto issue = [&](const std::vector<TileCommand>& g) {
        bool same = g.size() == n && n > 1;
        for (const TileCommand& tc : g) {
            same = same && encode_command_word(tc.cmd) == encode_command_word(g.front().cmd);
        }
        if (same) {
            p.issue(kBroadcast, encode_command_word(g.front().cmd));
        } else {
            for (const TileCommand& tc : g) {
                p.issue(tc.ntx, encode_command_word(tc.cmd));
            }
        }
        for (const TileCommand& tc : g) {
            ++issued[static_cast<size_t>(tc.ntx)];
        }
    };

    if (T == 0) {
        return p;
    }
    enqueue(plan.tiles[0].loads, load_tags[0]);
    for (size_t t = 0; t < T; ++t) {
        const Tile& tile = plan.tiles[t];
        const bool has_groups = !tile.groups.empty();
        if (has_groups) {
            configure(tile.groups[0]);
        }
        auto dma_step = [&] {
            if (t > 0) {
                wait_retired(retired_after[t - 1]);
                enqueue(plan.tiles[t - 1].stores, store_tags[t - 1]);
            }
            if (t + 1 < T) {
                enqueue(plan.tiles[t + 1].loads, load_tags[t + 1]);
            }
        };
        if (plan.memory_bound_order) {
            dma_step();
            wait_dma(load_tags[t]);
            if (has_groups) {
                issue(tile.groups[0]);
            }
        } else {
            wait_dma(load_tags[t]);
            if (has_groups) {
                issue(tile.groups[0]);
            }
            dma_step();
        }
        for (size_t g = 1; g < tile.groups.size(); ++g) {
            configure(tile.groups[g]);
            issue(tile.groups[g]);
        }
        retired_after[t] = issued;
        p.swap_buffers();
    }
    wait_retired(retired_after[T - 1]);
    enqueue(plan.tiles[T - 1].stores, store_tags[T - 1]);
    wait_dma(store_tags[T - 1]);
    return p;
}

LoweredKernel lower(const KernelSpec& spec, const ClusterConfig& cfg) {
    spec.validate();
    cfg.validate();
    Lowering L(cfg, spec);
    switch (spec.kind) {
    case KernelKind::Axpy:
        lower_axpy(L);
        break;
    case KernelKind::Gemv:
        lower_gemv(L);
        break;
    case KernelKind::Gemm:
        lower_gemm(L);
        break;
    case KernelKind::Conv2d:
        lower_conv(L);
        break;
    default:
        lower_stencil(L);
        break;
    }
    TilingPlan& plan = L.out.plan;
    uint32_t used = 0;
    for (const TcdmBuffer& b : plan.buffers) {
        used = std::max(used, b.offset / 4 + b.words);
    }
    plan.tcdm_words_used = used;
    if (!plan.tiles.empty()) {
        // the steady-state tile decides the schedule order
        const Tile& probe = plan.tiles[plan.tiles.size() / 2];
        plan.est_compute_cycles = estimate_compute(probe, cfg.n_ntx);
        plan.est_transfer_cycles = estimate_transfer(probe, cfg);
        plan.memory_bound_order = plan.est_compute_cycles < plan.est_transfer_cycles;
    }
    L.out.spec = L.spec;
    L.out.program = build_program(plan, cfg);
    L.out.ext_arrays = L.ext.arrays();
    L.out.ext_bytes = L.ext.bytes();
    return std::move(L.out);
}

std::vector<std::pair<std::string, std::vector<uint64_t>>> kernel_input_shapes(const KernelSpec& s) {
    switch (s.kind) {
    case KernelKind::Axpy:
        return {{"x", {s.n}}, {"y", {s.n}}};
    case KernelKind::Gemv:
        return {{"A", {s.m, s.n}}, {"x", {s.n}}};
    case KernelKind::Gemm:
        return {{"A", {s.m, s.k}}, {"B", {s.k, s.n}}, {"C", {s.m, s.n}}};
    case KernelKind::Conv2d:
        return {{"in", {s.h, s.w, s.c_in}}, {"wt", {s.c_out, s.ksize, s.ksize, s.c_in}}};
    case KernelKind::Laplace1d:
        return {{"u", {s.w}}};
    case KernelKind::Laplace3d:
        return {{"u", {s.d, s.h, s.w}}};
    default:
        return {{"u", {s.h, s.w}}};
    }
}

std::vector<uint64_t> kernel_output_shape(const KernelSpec& s) {
    switch (s.kind) {
    case KernelKind::Axpy:
        return {s.n};
    case KernelKind::Gemv:
        return {s.m};
    case KernelKind::Gemm:
        return {s.m, s.n};
    case KernelKind::Conv2d:
        return {s.h - s.ksize + 1, s.w - s.ksize + 1, s.c_out};
    case KernelKind::Laplace1d:
        return {s.w - 2};
    case KernelKind::Laplace2d:
        return {s.h - 2, s.w - 2};
    case KernelKind::Laplace3d:
        return {s.d - 2, s.h - 2, s.w - 2};
    case KernelKind::Diffusion:
        return {s.h - 4, s.w - 4};
    }
    return {};
}

KernelInputs make_inputs(const KernelSpec& spec, uint64_t seed, bool normal) {
    std::mt19937_64 rng(seed);
    auto uniform = [&]() {
        // 24 random bits scaled into [-1, 1)
        return static_cast<float>(static_cast<int64_t>(rng() >> 40) - (1LL << 23)) * 0x1p-23f;
    };
    auto gaussian = [&]() {
        const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53;
        const double u2 = static_cast<double>(rng() >> 11) * 0x1p-53;
        return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2));
    };
    KernelInputs in;
    for (const auto& [name, shape] : kernel_input_shapes(spec)) {
        uint64_t count = 1;
        for (uint64_t s : shape) {
            count *= s;
        }
        std::vector<float> v(count);
        for (float& x : v) {
            x = normal ? gaussian() : uniform();
        }
        in[name] = std::move(v);
    }
    return in;
}

KernelRun run_kernel(const KernelSpec& spec, const ClusterConfig& cfg, const KernelInputs& inputs) {
    KernelRun run;
    run.lowered = lower(spec, cfg);
    const LoweredKernel& lk = run.lowered;
    Cluster cluster(cfg);
    cluster.ext().resize(lk.ext_bytes);
    for (const auto& [name, shape] : kernel_input_shapes(lk.spec)) {
        const auto it = inputs.find(name);
        const ExtArray& arr = lk.array(name);
        if (it == inputs.end()) {
            fail(ErrorCode::InvalidArgument, "missing kernel input '" + name + "'");
        }
        if (it->second.size() != arr.elements()) {
            fail(ErrorCode::InvalidArgument, "kernel input '" + name + "' has " + std::to_string(it->second.size()) +
                                                 " elements, expected " + std::to_string(arr.elements()));
        }
        cluster.ext().write_floats(arr.offset, it->second);
    }
    for (const auto& [name, values] : lk.constants) {
        cluster.ext().write_floats(lk.array(name).offset, values);
    }
    run.report = cluster.run(lk.program);
    const ExtArray& out = lk.array(lk.output);
    run.output = cluster.ext().read_floats(out.offset, out.elements());
    if (lk.spec.kind == KernelKind::Conv2d && !run.output.empty()) {
        run.reuse_factor = static_cast<double>(run.report.fpu_ops) /
                           (static_cast<double>(run.report.bytes_out) / 4.0) / lk.spec.c_in;
    }
    run.trace = cluster.trace();
    return run;
}

}  // namespace ntx
