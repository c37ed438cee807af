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

#include "ntx/tcdm.hpp"

#include <fstream>
#include <sstream>

#include "ntx/error.hpp"

namespace ntx {

namespace {
std::string hex(uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}
}  // namespace

void TcdmConfig::validate() const {
    if (word_bytes != 4) {
        fail(ErrorCode::InvalidArgument, "TCDM word size must be 4 bytes");
    }
    if (banks == 0 || size_bytes == 0 || size_bytes % (banks * word_bytes) != 0) {
        fail(ErrorCode::InvalidArgument, "TCDM size must be a multiple of banks * word_bytes");
    }
}

BankArbiter::BankArbiter(uint32_t banks)
    : banks_(banks), last_grant_(banks, kMaxRequesters - 1), winner_(banks, -1) {
    stats_.stalls_per_requester.assign(kMaxRequesters, 0);
    touched_.reserve(64);
}

void BankArbiter::reset_stats() {
    stats_ = ArbiterStats{};
    stats_.stalls_per_requester.assign(kMaxRequesters, 0);
}

void BankArbiter::arbitrate(std::span<const MemRequest> requests, std::span<const uint32_t> banks,
                            std::span<uint8_t> granted) {
    ++stats_.cycles;
    touched_.clear();
    auto distance = [this](uint32_t bank, uint16_t id) {
        return (uint32_t{id} + kMaxRequesters - last_grant_[bank] - 1) % kMaxRequesters;
    };
    // Two rounds: NTX requests first, then DMA requests on banks left idle.
    for (int round = 0; round < 2; ++round) {
        const bool want_low = round == 1;
        for (size_t i = 0; i < requests.size(); ++i) {
            if (requests[i].low_priority != want_low) {
                continue;
            }
            const uint32_t b = banks[i];
            const int32_t w = winner_[b];
            if (w < 0) {
                winner_[b] = static_cast<int32_t>(i);
                touched_.push_back(b);
            } else if (requests[w].low_priority == want_low &&
                       distance(b, requests[i].requester) < distance(b, requests[w].requester)) {
                winner_[b] = static_cast<int32_t>(i);
            }
        }
    }
    for (size_t i = 0; i < requests.size(); ++i) {
        granted[i] = 0;
    }
    for (uint32_t b : touched_) {
        const auto w = static_cast<size_t>(winner_[b]);
        granted[w] = 1;
        last_grant_[b] = requests[w].requester;
        winner_[b] = -1;
    }
    for (size_t i = 0; i < requests.size(); ++i) {
        const MemRequest& r = requests[i];
        if (r.low_priority) {
            ++stats_.low_requests;
            if (granted[i]) {
                ++stats_.low_grants;
            } else {
                ++stats_.low_deferred;
            }
        } else {
            ++stats_.requests;
            if (granted[i]) {
                ++stats_.grants;
            } else {
                ++stats_.conflicts;
            }
        }
        if (!granted[i]) {
            ++stats_.stalls_per_requester[r.requester % kMaxRequesters];
        }
    }
}

Tcdm::Tcdm(TcdmConfig cfg) : cfg_(cfg), arbiter_((cfg.validate(), cfg.banks)) {
    mem_.assign(cfg_.size_bytes / cfg_.word_bytes, 0);
}

void Tcdm::check(uint32_t address) const {
    if (address % cfg_.word_bytes != 0) {
        fail(ErrorCode::AddressFault, "misaligned TCDM address " + hex(address));
    }
    if (address >= cfg_.size_bytes) {
        fail(ErrorCode::AddressFault, "TCDM address " + hex(address) + " out of range");
    }
}

uint32_t Tcdm::bank_of(uint32_t address) const {
    check(address);
    return (address / cfg_.word_bytes) % cfg_.banks;
}

uint32_t Tcdm::read_word(uint32_t address) const {
    check(address);
    return mem_[address / cfg_.word_bytes];
}

void Tcdm::write_word(uint32_t address, uint32_t value) {
    check(address);
    mem_[address / cfg_.word_bytes] = value;
}

void Tcdm::clear() {
    std::fill(mem_.begin(), mem_.end(), 0u);
}

void Tcdm::load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open TCDM image " + path);
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() > cfg_.size_bytes || bytes.size() % 4 != 0) {
        fail(ErrorCode::IoError, "TCDM image " + path + " has invalid size");
    }
    clear();
    for (size_t w = 0; w < bytes.size() / 4; ++w) {
        uint32_t v = 0;
        for (int b = 3; b >= 0; --b) {
            v = (v << 8) | static_cast<uint8_t>(bytes[w * 4 + b]);
        }
        mem_[w] = v;
    }
}

void Tcdm::save_image(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write TCDM image " + path);
    }
    for (uint32_t v : mem_) {
        const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                           static_cast<char>(v >> 24)};
        out.write(b, 4);
    }
}

void Tcdm::arbitrate(std::span<const MemRequest> requests, std::span<uint8_t> granted) {
    bank_scratch_.resize(requests.size());
    for (size_t i = 0; i < requests.size(); ++i) {
        bank_scratch_[i] = bank_of(requests[i].address);
    }
    arbiter_.arbitrate(requests, bank_scratch_, granted);
}

}  // namespace ntx
