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

#include "ntx/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "ntx/error.hpp"

namespace ntx {

namespace {

using nlohmann::json;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
}

class Reader {
public:
    explicit Reader(const std::vector<uint8_t>& b) : b_(b) {}
    uint64_t get(int bytes) {
        if (pos_ + static_cast<size_t>(bytes) > b_.size()) {
            fail(ErrorCode::IoError, "array container truncated at byte " + std::to_string(pos_));
        }
        uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            v |= uint64_t{b_[pos_++]} << (8 * i);
        }
        return v;
    }
    size_t remaining() const { return b_.size() - pos_; }
    size_t pos() const { return pos_; }
    void skip(size_t n) { pos_ += n; }

private:
    const std::vector<uint8_t>& b_;
    size_t pos_ = 0;
};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) {
        fail(ErrorCode::InvalidArgument, where + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            fail(ErrorCode::InvalidArgument, "unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) {
        return;
    }
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::InvalidArgument, std::string("bad value for '") + key + "' in " + where);
    }
}

}  // namespace

uint64_t NdArray::elements() const {
    uint64_t n = 1;
    for (uint64_t s : shape) {
        n *= s;
    }
    return n;
}

std::vector<float> NdArray::floats() const {
    if (dtype != DType::F32) {
        fail(ErrorCode::InvalidArgument, "array does not hold binary32 values");
    }
    std::vector<float> out(bits.size());
    for (size_t i = 0; i < bits.size(); ++i) {
        out[i] = std::bit_cast<float>(bits[i]);
    }
    return out;
}

NdArray NdArray::from_floats(std::vector<uint64_t> shape, const std::vector<float>& values) {
    NdArray a;
    a.shape = std::move(shape);
    if (a.elements() != values.size()) {
        fail(ErrorCode::InvalidArgument, "array shape does not match the number of values");
    }
    a.bits.resize(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
        a.bits[i] = std::bit_cast<uint32_t>(values[i]);
    }
    return a;
}

std::vector<uint8_t> encode_array(const NdArray& a) {
    if (a.elements() != a.bits.size()) {
        fail(ErrorCode::InvalidArgument, "array shape does not match its payload");
    }
    std::vector<uint8_t> out(kArrayMagic, kArrayMagic + 8);
    put_u32(out, static_cast<uint32_t>(a.dtype));
    put_u32(out, static_cast<uint32_t>(a.shape.size()));
    for (uint64_t s : a.shape) {
        put_u64(out, s);
    }
    out.reserve(out.size() + 4 * a.bits.size());
    for (uint32_t w : a.bits) {
        put_u32(out, w);
    }
    return out;
}

NdArray decode_array(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kArrayMagic, 8) != 0) {
        fail(ErrorCode::IoError, "not an NTXARR01 array container");
    }
    Reader r(bytes);
    r.skip(8);
    NdArray a;
    const auto dtype = static_cast<uint32_t>(r.get(4));
    if (dtype != static_cast<uint32_t>(DType::F32) && dtype != static_cast<uint32_t>(DType::U32)) {
        fail(ErrorCode::IoError, "unsupported array dtype " + std::to_string(dtype));
    }
    a.dtype = static_cast<DType>(dtype);
    const auto ndim = static_cast<uint32_t>(r.get(4));
    if (ndim > 8) {
        fail(ErrorCode::IoError, "array rank " + std::to_string(ndim) + " exceeds 8");
    }
    for (uint32_t i = 0; i < ndim; ++i) {
        a.shape.push_back(r.get(8));
    }
    const uint64_t n = a.elements();
    if (r.remaining() != n * 4) {
        fail(ErrorCode::IoError, "array payload has " + std::to_string(r.remaining()) + " bytes, expected " +
                                     std::to_string(n * 4));
    }
    a.bits.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
        a.bits[i] = static_cast<uint32_t>(r.get(4));
    }
    return a;
}

void save_array(const std::string& path, const NdArray& a) {
    const auto bytes = encode_array(a);
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        fail(ErrorCode::IoError, "write to '" + path + "' failed");
    }
}

NdArray load_array(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        fail(ErrorCode::IoError, "cannot open '" + path + "'");
    }
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_array(bytes);
}

ClusterConfig cluster_config_from_json(const json& j) {
    ClusterConfig c;
    const std::string where = "cluster config";
    check_keys(j, {"n_ntx", "f_ntx_hz", "f_cluster_hz", "tcdm", "dma", "ntx", "energy_pj_per_flop",
                   "dma_setup_cluster_cycles", "max_ntx_cycles", "trace"},
               where);
    read(j, "n_ntx", c.n_ntx, where);
    read(j, "f_ntx_hz", c.f_ntx_hz, where);
    read(j, "f_cluster_hz", c.f_cluster_hz, where);
    read(j, "energy_pj_per_flop", c.energy_pj_per_flop, where);
    read(j, "dma_setup_cluster_cycles", c.dma_setup_cluster_cycles, where);
    read(j, "max_ntx_cycles", c.max_ntx_cycles, where);
    read(j, "trace", c.trace, where);
    if (j.contains("tcdm")) {
        const json& t = j["tcdm"];
        check_keys(t, {"size_bytes", "banks", "word_bytes"}, "tcdm config");
        read(t, "size_bytes", c.tcdm.size_bytes, "tcdm config");
        read(t, "banks", c.tcdm.banks, "tcdm config");
        read(t, "word_bytes", c.tcdm.word_bytes, "tcdm config");
    }
    if (j.contains("dma")) {
        const json& d = j["dma"];
        check_keys(d, {"axi_bits", "ext_latency_ntx_cycles", "queue_depth", "tcdm_ports", "staging_bytes"},
                   "dma config");
        read(d, "axi_bits", c.dma.axi_bits, "dma config");
        read(d, "ext_latency_ntx_cycles", c.dma.ext_latency_ntx_cycles, "dma config");
        read(d, "queue_depth", c.dma.queue_depth, "dma config");
        read(d, "tcdm_ports", c.dma.tcdm_ports, "dma config");
        read(d, "staging_bytes", c.dma.staging_bytes, "dma config");
    }
    if (j.contains("ntx")) {
        const json& n = j["ntx"];
        check_keys(n, {"fifo_depth", "fpu_latency"}, "ntx config");
        read(n, "fifo_depth", c.ntx.fifo_depth, "ntx config");
        read(n, "fpu_latency", c.ntx.fpu_latency, "ntx config");
    }
    c.validate();
    return c;
}

nlohmann::ordered_json cluster_config_to_json(const ClusterConfig& c) {
    nlohmann::ordered_json j;
    j["n_ntx"] = c.n_ntx;
    j["f_ntx_hz"] = c.f_ntx_hz;
    j["f_cluster_hz"] = c.f_cluster_hz;
    j["tcdm"] = {{"size_bytes", c.tcdm.size_bytes}, {"banks", c.tcdm.banks}, {"word_bytes", c.tcdm.word_bytes}};
    j["dma"] = {{"axi_bits", c.dma.axi_bits},
                {"ext_latency_ntx_cycles", c.dma.ext_latency_ntx_cycles},
                {"queue_depth", c.dma.queue_depth},
                {"tcdm_ports", c.dma.tcdm_ports},
                {"staging_bytes", c.dma.staging_bytes}};
    j["ntx"] = {{"fifo_depth", c.ntx.fifo_depth}, {"fpu_latency", c.ntx.fpu_latency}};
    j["energy_pj_per_flop"] = c.energy_pj_per_flop;
    j["dma_setup_cluster_cycles"] = c.dma_setup_cluster_cycles;
    j["max_ntx_cycles"] = c.max_ntx_cycles;
    j["trace"] = c.trace;
    return j;
}

// "label" is accepted so that the kernel section of a report loads back.
KernelSpec kernel_spec_from_json(const json& j) {
    const std::string where = "kernel spec";
    check_keys(j, {"kind", "label", "n", "m", "k", "h", "w", "d", "ksize", "c_in", "c_out", "alpha", "nu", "tile_x", "tile_y",
                   "tile_z", "block", "block_k"},
               where);
    KernelSpec s;
    std::string kind;
    read(j, "kind", kind, where);
    const auto k = kernel_kind_from_name(kind);
    if (!k) {
        fail(ErrorCode::InvalidArgument, "unknown kernel kind '" + kind + "'");
    }
    s.kind = *k;
    read(j, "n", s.n, where);
    read(j, "m", s.m, where);
    read(j, "k", s.k, where);
    read(j, "h", s.h, where);
    read(j, "w", s.w, where);
    read(j, "d", s.d, where);
    read(j, "ksize", s.ksize, where);
    read(j, "c_in", s.c_in, where);
    read(j, "c_out", s.c_out, where);
    read(j, "alpha", s.alpha, where);
    read(j, "nu", s.nu, where);
    read(j, "tile_x", s.tile_x, where);
    read(j, "tile_y", s.tile_y, where);
    read(j, "tile_z", s.tile_z, where);
    read(j, "block", s.block, where);
    read(j, "block_k", s.block_k, where);
    s.validate();
    return s;
}

nlohmann::ordered_json kernel_spec_to_json(const KernelSpec& s) {
    nlohmann::ordered_json j;
    j["kind"] = std::string(kernel_kind_name(s.kind));
    j["label"] = s.label();
    switch (s.kind) {
    case KernelKind::Axpy:
        j["n"] = s.n;
        j["alpha"] = s.alpha;
        break;
    case KernelKind::Gemv:
        j["m"] = s.m;
        j["n"] = s.n;
        break;
    case KernelKind::Gemm:
        j["m"] = s.m;
        j["n"] = s.n;
        j["k"] = s.k;
        break;
    case KernelKind::Conv2d:
        j["h"] = s.h;
        j["w"] = s.w;
        j["ksize"] = s.ksize;
        j["c_in"] = s.c_in;
        j["c_out"] = s.c_out;
        break;
    default:
        j["w"] = s.w;
        if (s.kind != KernelKind::Laplace1d) {
            j["h"] = s.h;
        }
        if (s.kind == KernelKind::Laplace3d) {
            j["d"] = s.d;
        }
        if (s.kind == KernelKind::Diffusion) {
            j["nu"] = s.nu;
        }
        break;
    }
    j["tile_x"] = s.tile_x;
    j["tile_y"] = s.tile_y;
    j["tile_z"] = s.tile_z;
    j["block"] = s.block;
    j["block_k"] = s.block_k;
    return j;
}

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        fail(ErrorCode::IoError, "cannot open '" + path + "'");
    }
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::InvalidArgument, "'" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace ntx
