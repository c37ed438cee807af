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

#include "ntx/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ntx/error.hpp"

namespace ntx {

void ClusterConfig::validate() const {
    if (n_ntx == 0 || n_ntx > 64) {
        fail(ErrorCode::InvalidArgument, "n_ntx must be in [1, 64]");
    }
    if (!(f_cluster_hz > 0.0) || f_ntx_hz != 2.0 * f_cluster_hz) {
        fail(ErrorCode::InvalidArgument, "the NTX clock must be exactly twice the cluster clock");
    }
    if (!(energy_pj_per_flop >= 0.0)) {
        fail(ErrorCode::InvalidArgument, "energy per flop must be non-negative");
    }
    tcdm.validate();
    dma.validate();
}

std::string_view action_name(const Action& a) {
    struct Visitor {
        std::string_view operator()(const action::Configure&) const { return "configure"; }
        std::string_view operator()(const action::Issue&) const { return "issue"; }
        std::string_view operator()(const action::Dma&) const { return "dma"; }
        std::string_view operator()(const action::Barrier&) const { return "barrier"; }
        std::string_view operator()(const action::SwapBuffers&) const { return "swap_buffers"; }
    };
    return std::visit(Visitor{}, a);
}

uint64_t controller_overhead_model(const Program& program, const ClusterConfig& cfg) {
    uint64_t cycles = 0;
    for (const Action& a : program.actions) {
        if (const auto* c = std::get_if<action::Configure>(&a)) {
            cycles += c->writes.size();
        } else if (std::holds_alternative<action::Issue>(a)) {
            cycles += 1;
        } else if (std::holds_alternative<action::Dma>(a)) {
            cycles += cfg.dma_setup_cluster_cycles;
        }
    }
    return cycles;
}

EnergyEstimate energy_estimate(const PerfReport& report, const ClusterConfig& cfg) {
    EnergyEstimate e;
    e.energy_j = static_cast<double>(report.flops) * cfg.energy_pj_per_flop * 1e-12;
    const double seconds = static_cast<double>(report.ntx_cycles) / cfg.f_ntx_hz;
    e.power_w = seconds > 0.0 ? e.energy_j / seconds : 0.0;
    e.gflops_per_watt = report.flops > 0 && cfg.energy_pj_per_flop > 0.0 ? 1000.0 / cfg.energy_pj_per_flop : 0.0;
    return e;
}

Cluster::Cluster(ClusterConfig cfg) : cfg_(std::move(cfg)), tcdm_(cfg_.tcdm) {
    cfg_.validate();
    dma_ = std::make_unique<Dma>(cfg_.dma, tcdm_, ext_);
    for (uint32_t i = 0; i < cfg_.n_ntx; ++i) {
        ntx_.push_back(std::make_unique<NtxCore>(static_cast<uint16_t>(i), cfg_.ntx, cfg_.tcdm));
        if (cfg_.trace) {
            ntx_.back()->set_trace(&trace_);
        }
    }
}

bool Cluster::all_idle() const {
    if (!dma_->idle()) {
        return false;
    }
    return std::none_of(ntx_.begin(), ntx_.end(), [](const auto& n) { return n->busy(); });
}

// Returns true while the controller is blocked on a barrier that waits for DMA.
bool Cluster::controller_step(const Program& program, uint64_t cycle) {
    while (pc_ < program.actions.size() && cycle >= ctrl_ready_) {
        const Action& a = program.actions[pc_];
        auto targets = [&](int ntx) {
            if (ntx != kBroadcast && (ntx < 0 || static_cast<size_t>(ntx) >= ntx_.size())) {
                fail(ErrorCode::InvalidArgument, "NTX index " + std::to_string(ntx) + " out of range");
            }
            return ntx;
        };
        if (const auto* c = std::get_if<action::Configure>(&a)) {
            const int t = targets(c->ntx);
            for (const auto& [offset, value] : c->writes) {
                for (size_t i = 0; i < ntx_.size(); ++i) {
                    if (t == kBroadcast || static_cast<size_t>(t) == i) {
                        ntx_[i]->write_register(offset, value, cycle);
                    }
                }
            }
            ctrl_ready_ = cycle + 2 * c->writes.size();
            controller_cycles_ += c->writes.size();
            ++pc_;
        } else if (const auto* is = std::get_if<action::Issue>(&a)) {
            const int t = targets(is->ntx);
            bool blocked = false;
            for (size_t i = 0; i < ntx_.size(); ++i) {
                if ((t == kBroadcast || static_cast<size_t>(t) == i) && ntx_[i]->busy()) {
                    blocked = true;
                }
            }
            if (blocked) {
                return false;
            }
            for (size_t i = 0; i < ntx_.size(); ++i) {
                if (t == kBroadcast || static_cast<size_t>(t) == i) {
                    ntx_[i]->write_register(reg::kCommand, is->command_word, cycle);
                }
            }
            ctrl_ready_ = cycle + 2;
            controller_cycles_ += 1;
            ++pc_;
        } else if (const auto* d = std::get_if<action::Dma>(&a)) {
            if (!dma_->can_enqueue()) {
                return false;
            }
            if (dma_tags_.count(d->tag) != 0) {
                fail(ErrorCode::InvalidArgument, "DMA tag " + std::to_string(d->tag) + " used twice");
            }
            dma_tags_[d->tag] = dma_->enqueue(d->job, cycle);
            ctrl_ready_ = cycle + 2ULL * cfg_.dma_setup_cluster_cycles;
            controller_cycles_ += cfg_.dma_setup_cluster_cycles;
            ++pc_;
        } else if (const auto* b = std::get_if<action::Barrier>(&a)) {
            for (const auto& [ntx, count] : b->retired) {
                if (ntx_.at(static_cast<size_t>(targets(ntx)))->retired_commands() < count) {
                    return false;
                }
            }
            for (uint32_t tag : b->dma_tags) {
                const auto it = dma_tags_.find(tag);
                if (it == dma_tags_.end()) {
                    fail(ErrorCode::InvalidArgument, "barrier waits on DMA tag " + std::to_string(tag) +
                                                         " that was never enqueued");
                }
                if (!dma_->completed(it->second)) {
                    return true;
                }
            }
            ++pc_;
        } else {
            ++pc_;
        }
    }
    return false;
}

PerfReport Cluster::run(const Program& program) {
    if (ran_) {
        fail(ErrorCode::InvalidArgument, "a cluster instance runs a single program");
    }
    ran_ = true;
    std::vector<MemRequest> requests;
    std::vector<uint8_t> granted;
    std::vector<size_t> split(ntx_.size() + 1);
    std::array<uint64_t, kStallCauses> dma_wait{};
    uint64_t cycle = 0;
    try {
        while (pc_ < program.actions.size() || !all_idle() || cycle < ctrl_ready_) {
            if (cycle >= cfg_.max_ntx_cycles) {
                fail(ErrorCode::InvalidArgument, "cycle limit reached; the program does not terminate");
            }
            if (cycle % 2 == 0) {
                waiting_on_dma_ = controller_step(program, cycle);
            }
            requests.clear();
            for (size_t i = 0; i < ntx_.size(); ++i) {
                split[i] = requests.size();
                ntx_[i]->step(cycle, requests);
            }
            split[ntx_.size()] = requests.size();
            dma_->collect_requests(cycle, requests);
            granted.assign(requests.size(), 0);
            tcdm_.arbitrate(requests, granted);
            const std::span<const MemRequest> all(requests);
            const std::span<const uint8_t> all_granted(granted);
            for (size_t i = 0; i < ntx_.size(); ++i) {
                const size_t n = split[i + 1] - split[i];
                ntx_[i]->commit(cycle, all.subspan(split[i], n), all_granted.subspan(split[i], n), tcdm_);
            }
            const size_t base = split[ntx_.size()];
            dma_->commit(cycle, all.subspan(base), all_granted.subspan(base));
            if (waiting_on_dma_) {
                for (const auto& n : ntx_) {
                    if (!n->busy()) {
                        ++dma_wait[static_cast<int>(StallCause::DmaWait)];
                    }
                }
            }
            ++cycle;
        }
    } catch (const Error& e) {
        std::ostringstream os;
        os << "action #" << pc_;
        if (pc_ < program.actions.size()) {
            os << " (" << action_name(program.actions[pc_]) << ")";
        }
        os << " at NTX cycle " << cycle << ": " << e.what();
        fail(e.code(), os.str());
    }

    PerfReport r;
    r.ntx_cycles = cycle;
    r.cluster_cycles = (cycle + 1) / 2;
    uint64_t first = UINT64_MAX;
    uint64_t last = 0;
    for (const auto& n : ntx_) {
        const NtxStats& s = n->stats();
        r.flops += s.flops;
        r.fpu_ops += s.fpu_ops;
        r.commands += s.commands;
        for (int k = 0; k < kStallCauses; ++k) {
            r.stall_cycles[k] += s.stalls[k];
        }
        if (s.fpu_ops > 0) {
            first = std::min(first, s.first_fpu_cycle);
            last = std::max(last, s.last_fpu_cycle);
        }
    }
    r.stall_cycles[static_cast<int>(StallCause::DmaWait)] += dma_wait[static_cast<int>(StallCause::DmaWait)];
    r.fpu_window_cycles = first == UINT64_MAX ? 0 : last - first + 1;
    const DmaStats& ds = dma_->stats();
    r.bytes_in = ds.bytes_in;
    r.bytes_out = ds.bytes_out;
    r.dma_deferrals = ds.tcdm_deferrals;
    r.controller_cluster_cycles = controller_cycles_;

    r.peak_gflops = cfg_.peak_flops() / 1e9;
    const double seconds = static_cast<double>(r.ntx_cycles) / cfg_.f_ntx_hz;
    r.achieved_gflops = seconds > 0.0 ? static_cast<double>(r.flops) / seconds / 1e9 : 0.0;
    r.steady_state_gflops = r.fpu_window_cycles > 0
                                ? static_cast<double>(r.flops) /
                                      (static_cast<double>(r.fpu_window_cycles) / cfg_.f_ntx_hz) / 1e9
                                : 0.0;
    const uint64_t traffic = r.bytes_in + r.bytes_out;
    r.operational_intensity = traffic > 0 ? static_cast<double>(r.flops) / static_cast<double>(traffic) : 0.0;
    r.utilization = r.peak_gflops > 0.0 ? r.achieved_gflops / r.peak_gflops : 0.0;
    r.dma_bandwidth_gbs = ds.ext_active_cycles > 0
                              ? static_cast<double>(traffic) /
                                    (static_cast<double>(ds.ext_active_cycles) / cfg_.f_cluster_hz) / 1e9
                              : 0.0;

    const ArbiterStats& as = tcdm_.stats();
    r.tcdm_requests = as.requests;
    r.tcdm_conflicts = as.conflicts;
    r.conflict_probability = as.conflict_probability();

    const EnergyEstimate e = energy_estimate(r, cfg_);
    r.energy_j = e.energy_j;
    r.power_w = e.power_w;
    r.gflops_per_watt = e.gflops_per_watt;
    r.power_at_peak_w = cfg_.peak_flops() * cfg_.energy_pj_per_flop * 1e-12;
    r.warnings = dma_->warnings();
    return r;
}

}  // namespace ntx
