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

#include "ntx/dma.hpp"

#include <algorithm>
#include <sstream>

#include "ntx/error.hpp"

namespace ntx {

void ExtMemory::check(uint64_t address, uint64_t len) const {
    if (address > bytes_.size() || len > bytes_.size() - address) {
        std::ostringstream os;
        os << "external address 0x" << std::hex << address << " (+" << std::dec << len
           << ") outside the " << bytes_.size() << " byte image";
        fail(ErrorCode::AddressFault, os.str());
    }
}

uint32_t ExtMemory::read_word(uint64_t address) const {
    check(address, 4);
    const uint8_t* p = bytes_.data() + address;
    return uint32_t{p[0]} | (uint32_t{p[1]} << 8) | (uint32_t{p[2]} << 16) | (uint32_t{p[3]} << 24);
}

void ExtMemory::write_word(uint64_t address, uint32_t value) {
    check(address, 4);
    uint8_t* p = bytes_.data() + address;
    p[0] = static_cast<uint8_t>(value);
    p[1] = static_cast<uint8_t>(value >> 8);
    p[2] = static_cast<uint8_t>(value >> 16);
    p[3] = static_cast<uint8_t>(value >> 24);
}

void ExtMemory::write_floats(uint64_t address, std::span<const float> values) {
    check(address, values.size() * 4);
    for (size_t i = 0; i < values.size(); ++i) {
        write(address + 4 * i, F32::from_float(values[i]));
    }
}

std::vector<float> ExtMemory::read_floats(uint64_t address, size_t count) const {
    check(address, count * 4);
    std::vector<float> out(count);
    for (size_t i = 0; i < count; ++i) {
        out[i] = read(address + 4 * i).to_float();
    }
    return out;
}

void DmaConfig::validate() const {
    if (axi_bits < 32 || axi_bits % 32 != 0 || axi_bits > 1024) {
        fail(ErrorCode::InvalidArgument, "AXI width must be a multiple of 32 bits in [32, 1024]");
    }
    if (queue_depth == 0) {
        fail(ErrorCode::InvalidArgument, "DMA queue depth must be at least 1");
    }
}

Dma::Dma(DmaConfig cfg, Tcdm& tcdm, ExtMemory& ext) : cfg_(cfg), tcdm_(tcdm), ext_(ext) {
    cfg_.validate();
    const uint32_t beat_words = cfg_.axi_bytes_per_cluster_cycle() / 4;
    const uint32_t words_per_ntx_cycle = (beat_words + 1) / 2;
    ports_ = cfg_.tcdm_ports != 0 ? cfg_.tcdm_ports : std::max(2u, 2 * words_per_ntx_cycle);
    const uint32_t staging = cfg_.staging_bytes != 0 ? cfg_.staging_bytes
                                                     : std::max(64u, 4 * cfg_.axi_bytes_per_cluster_cycle());
    staging_words_ = std::max(beat_words, staging / 4);
    staging_.reserve(staging_words_);
}

uint64_t Dma::ext_address(const DmaJob& job, uint64_t word) const {
    const uint64_t per_row = job.width_bytes / 4;
    return job.ext_base + (word / per_row) * job.ext_stride + (word % per_row) * 4;
}

uint32_t Dma::tcdm_address(const DmaJob& job, uint64_t word) const {
    const uint64_t per_row = job.width_bytes / 4;
    return static_cast<uint32_t>(job.tcdm_base + (word / per_row) * job.tcdm_stride + (word % per_row) * 4);
}

uint32_t Dma::enqueue(const DmaJob& job, uint64_t cycle) {
    if (job.width_bytes % 4 != 0 || job.tcdm_base % 4 != 0) {
        fail(ErrorCode::AddressFault, "DMA transfers must be word aligned");
    }
    const bool empty = job.rows == 0 || job.width_bytes == 0;
    if (!empty) {
        if (job.rows > 1 && (job.tcdm_stride < job.width_bytes || job.ext_stride < job.width_bytes ||
                             job.tcdm_stride % 4 != 0)) {
            fail(ErrorCode::AddressFault, "DMA row width exceeds its stride");
        }
        const uint64_t tcdm_end = uint64_t{job.tcdm_base} + uint64_t{job.rows - 1} * job.tcdm_stride + job.width_bytes;
        if (tcdm_end > tcdm_.config().size_bytes) {
            fail(ErrorCode::AddressFault, "DMA footprint leaves the TCDM");
        }
        const uint64_t ext_end = job.ext_base + uint64_t{job.rows - 1} * job.ext_stride + job.width_bytes;
        if (ext_end > ext_.size()) {
            fail(ErrorCode::AddressFault, "DMA footprint leaves external memory");
        }
        auto span_of = [](const DmaJob& j) {
            return std::pair<uint64_t, uint64_t>{j.tcdm_base,
                                                 uint64_t{j.tcdm_base} + uint64_t{j.rows - 1} * j.tcdm_stride + j.width_bytes};
        };
        auto overlaps = [&](const DmaJob& other) {
            if (other.rows == 0 || other.width_bytes == 0) {
                return false;
            }
            const auto a = span_of(job);
            const auto b = span_of(other);
            return a.first < b.second && b.first < a.second;
        };
        bool clash = active_valid_ && overlaps(active_.job);
        for (const auto& q : queue_) {
            clash = clash || overlaps(q.second);
        }
        if (clash) {
            warnings_.push_back("DMA job " + std::to_string(completed_.size()) +
                                " overlaps the TCDM footprint of an in-flight job");
        }
    }
    if (!empty && !can_enqueue()) {
        fail(ErrorCode::InvalidArgument, "DMA queue full");
    }
    const auto id = static_cast<uint32_t>(completed_.size());
    completed_.push_back(empty);
    if (empty) {
        completions_.push_back({id, cycle});
        ++stats_.jobs_completed;
        return id;
    }
    queue_.emplace_back(id, job);
    stats_.max_queue_occupancy = std::max<uint32_t>(stats_.max_queue_occupancy, static_cast<uint32_t>(queue_.size()));
    return id;
}

void Dma::start_next(uint64_t cycle) {
    if (active_valid_ || queue_.empty()) {
        return;
    }
    active_ = Active{};
    active_.id = queue_.front().first;
    active_.job = queue_.front().second;
    queue_.pop_front();
    active_.total_words = active_.job.bytes() / 4;
    const bool back_to_back = ever_completed_ && cycle <= last_completion_cycle_ + 1;
    active_.ext_ready_cycle = (back_to_back || active_.job.direction == DmaDirection::Out)
                                  ? cycle
                                  : cycle + cfg_.ext_latency_ntx_cycles;
    active_valid_ = true;
    staging_.clear();
    retry_reads_.clear();
    read_cursor_ = 0;
}

void Dma::finish(uint64_t cycle) {
    completed_[active_.id] = true;
    completions_.push_back({active_.id, cycle});
    ++stats_.jobs_completed;
    last_completion_cycle_ = cycle;
    ever_completed_ = true;
    active_valid_ = false;
    staging_.clear();
}

void Dma::collect_requests(uint64_t cycle, std::vector<MemRequest>& out) {
    pending_reads_.clear();
    pending_writes_.clear();
    start_next(cycle);
    if (!active_valid_) {
        return;
    }
    ++stats_.busy_cycles;
    const bool edge = cycle % 2 == 0;
    const uint64_t beat_words = cfg_.axi_bytes_per_cluster_cycle() / 4;
    const DmaJob& job = active_.job;

    if (job.direction == DmaDirection::In) {
        if (edge && cycle >= active_.ext_ready_cycle) {
            const uint64_t room = staging_words_ - staging_.size();
            const uint64_t n = std::min({beat_words, active_.total_words - active_.ext_words, room});
            for (uint64_t i = 0; i < n; ++i) {
                const uint64_t w = active_.ext_words + i;
                staging_.push_back({w, ext_.read_word(ext_address(job, w))});
            }
            active_.ext_words += n;
            stats_.bytes_in += 4 * n;
            if (n > 0) {
                ++stats_.ext_active_cycles;
            }
        }
        const size_t n = std::min<size_t>(ports_, staging_.size());
        for (size_t i = 0; i < n; ++i) {
            MemRequest r;
            r.requester = static_cast<uint16_t>(kRequesterBase + i);
            r.kind = MemKind::Write;
            r.low_priority = true;
            r.address = tcdm_address(job, staging_[i].word);
            r.value = staging_[i].value;
            out.push_back(r);
            pending_writes_.push_back(i);
        }
        return;
    }

    if (edge && !staging_.empty()) {
        const size_t n = std::min<size_t>(beat_words, staging_.size());
        for (size_t i = 0; i < n; ++i) {
            ext_.write_word(ext_address(job, staging_[i].word), staging_[i].value);
        }
        staging_.erase(staging_.begin(), staging_.begin() + static_cast<std::ptrdiff_t>(n));
        active_.ext_words += n;
        stats_.bytes_out += 4 * n;
        ++stats_.ext_active_cycles;
        if (active_.ext_words == active_.total_words) {
            finish(cycle);
            return;
        }
    }
    size_t room = staging_words_ - staging_.size();
    size_t port = 0;
    auto issue = [&](uint64_t w) {
        MemRequest r;
        r.requester = static_cast<uint16_t>(kRequesterBase + port++);
        r.kind = MemKind::Read;
        r.low_priority = true;
        r.address = tcdm_address(job, w);
        out.push_back(r);
        pending_reads_.push_back(w);
        --room;
    };
    for (uint64_t w : retry_reads_) {
        if (port >= ports_ || room == 0) {
            break;
        }
        issue(w);
    }
    retry_reads_.erase(retry_reads_.begin(), retry_reads_.begin() + static_cast<std::ptrdiff_t>(pending_reads_.size()));
    while (port < ports_ && room > 0 && read_cursor_ < active_.total_words) {
        issue(read_cursor_++);
    }
}

void Dma::commit(uint64_t cycle, std::span<const MemRequest> requests, std::span<const uint8_t> granted) {
    if (!active_valid_) {
        return;
    }
    if (active_.job.direction == DmaDirection::In) {
        std::vector<Staged> remaining;
        remaining.reserve(staging_.size());
        for (size_t i = 0; i < staging_.size(); ++i) {
            const bool requested = i < pending_writes_.size();
            if (requested && granted[i]) {
                tcdm_.write_word(requests[i].address, requests[i].value);
                ++active_.tcdm_words;
            } else {
                if (requested) {
                    ++stats_.tcdm_deferrals;
                }
                remaining.push_back(staging_[i]);
            }
        }
        staging_.swap(remaining);
        if (active_.tcdm_words == active_.total_words) {
            finish(cycle);
        }
        return;
    }
    for (size_t i = 0; i < pending_reads_.size(); ++i) {
        if (granted[i]) {
            staging_.push_back({pending_reads_[i], tcdm_.read_word(requests[i].address)});
            ++active_.tcdm_words;
        } else {
            ++stats_.tcdm_deferrals;
            retry_reads_.push_back(pending_reads_[i]);
        }
    }
}

std::vector<DmaCompletion> Dma::take_completions() {
    std::vector<DmaCompletion> out;
    out.swap(completions_);
    return out;
}

}  // namespace ntx
