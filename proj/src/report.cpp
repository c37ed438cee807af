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

#include "ntx/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ntx/io.hpp"

namespace ntx {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string_view bound_name(Bound b) { return b == Bound::Compute ? "COMPUTE" : "MEMORY"; }

double roofline_attainable(const ClusterConfig& cfg, double oi) {
    return std::min(cfg.peak_flops(), cfg.memory_bandwidth() * oi) / 1e9;
}

double roofline_practical(const ClusterConfig& cfg, double oi, double conflict_rate) {
    return std::min(cfg.peak_flops() * (1.0 - conflict_rate), cfg.memory_bandwidth() * oi) / 1e9;
}

double ridge_point(const ClusterConfig& cfg) { return cfg.peak_flops() / cfg.memory_bandwidth(); }

RooflinePoint roofline_point(const std::string& label, const PerfReport& r, const ClusterConfig& cfg) {
    RooflinePoint p;
    p.label = label;
    p.oi = r.operational_intensity;
    p.achieved_gflops = r.achieved_gflops;
    p.utilization = r.utilization;
    p.attainable_gflops = roofline_attainable(cfg, p.oi);
    p.practical_gflops = roofline_practical(cfg, p.oi);
    p.bound = (p.oi > 0.0 && p.oi < ridge_point(cfg)) ? Bound::Memory : Bound::Compute;
    return p;
}

nlohmann::ordered_json report_json(const PerfReport& r, const ClusterConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["cycles"] = {{"ntx", r.ntx_cycles},
                   {"cluster", r.cluster_cycles},
                   {"controller_cluster", r.controller_cluster_cycles},
                   {"fpu_window", r.fpu_window_cycles}};
    j["work"] = {{"flops", r.flops}, {"fpu_ops", r.fpu_ops}, {"commands", r.commands}};
    j["traffic"] = {{"bytes_in", r.bytes_in},
                    {"bytes_out", r.bytes_out},
                    {"operational_intensity", r.operational_intensity},
                    {"dma_bandwidth_gbs", r.dma_bandwidth_gbs},
                    {"memory_roof_gbs", cfg.memory_bandwidth() / 1e9}};
    const RooflinePoint p = roofline_point("", r, cfg);
    j["performance"] = {{"achieved_gflops", r.achieved_gflops},
                        {"steady_state_gflops", r.steady_state_gflops},
                        {"peak_gflops", r.peak_gflops},
                        {"utilization", r.utilization},
                        {"attainable_gflops", p.attainable_gflops},
                        {"practical_gflops", p.practical_gflops},
                        {"bound", bound_name(p.bound)}};
    nlohmann::ordered_json stalls;
    for (int i = 0; i < kStallCauses; ++i) {
        stalls[std::string(stall_cause_name(static_cast<StallCause>(i)))] = r.stall_cycles[static_cast<size_t>(i)];
    }
    j["stalls"] = stalls;
    j["tcdm"] = {{"requests", r.tcdm_requests},
                 {"conflicts", r.tcdm_conflicts},
                 {"conflict_probability", r.conflict_probability},
                 {"dma_deferrals", r.dma_deferrals}};
    j["energy"] = {{"energy_j", r.energy_j},
                   {"power_w", r.power_w},
                   {"power_at_peak_w", r.power_at_peak_w},
                   {"gflops_per_watt", r.gflops_per_watt},
                   {"pj_per_flop", cfg.energy_pj_per_flop}};
    j["warnings"] = r.warnings;
    return j;
}

nlohmann::ordered_json kernel_report_json(const KernelRun& run, const ClusterConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["kernel"] = kernel_spec_to_json(run.lowered.spec);
    const TilingPlan& plan = run.lowered.plan;
    nlohmann::ordered_json buffers = nlohmann::ordered_json::array();
    for (const TcdmBuffer& b : plan.buffers) {
        buffers.push_back({{"name", b.name}, {"offset", b.offset}, {"words", b.words}});
    }
    j["plan"] = {{"tiles", plan.tiles.size()},
                 {"tcdm_words_used", plan.tcdm_words_used},
                 {"schedule", plan.memory_bound_order ? "transfer-first" : "compute-first"},
                 {"est_compute_cycles", plan.est_compute_cycles},
                 {"est_transfer_cycles", plan.est_transfer_cycles},
                 {"actions", run.lowered.program.actions.size()},
                 {"buffers", buffers}};
    j["config"] = cluster_config_to_json(cfg);
    const nlohmann::ordered_json base = report_json(run.report, cfg);
    for (auto it = base.begin(); it != base.end(); ++it) {
        if (it.key() != "schema") {
            j[it.key()] = *it;
        }
    }
    if (run.lowered.spec.kind == KernelKind::Conv2d) {
        j["work"]["reuse_factor"] = run.reuse_factor;
    }
    return j;
}

nlohmann::ordered_json roofline_point_json(const RooflinePoint& p) {
    return {{"kernel", p.label},
            {"oi", p.oi},
            {"achieved_gflops", p.achieved_gflops},
            {"attainable_gflops", p.attainable_gflops},
            {"practical_gflops", p.practical_gflops},
            {"bound", bound_name(p.bound)},
            {"utilization", p.utilization}};
}

std::string roofline_csv_header() {
    return "kernel,oi_flop_per_byte,achieved_gflops,attainable_gflops,practical_gflops,bound,utilization\n";
}

std::string roofline_csv_row(const RooflinePoint& p) {
    return csv_field(p.label) + "," + fmt(p.oi) + "," + fmt(p.achieved_gflops) + "," + fmt(p.attainable_gflops) + "," +
           fmt(p.practical_gflops) + "," + std::string(bound_name(p.bound)) + "," + fmt(p.utilization) + "\n";
}

std::string roof_lines_csv(const ClusterConfig& cfg, double oi_min, double oi_max, int samples) {
    std::string out = "oi_flop_per_byte,memory_roof_gflops,compute_roof_gflops,practical_compute_gflops,"
                      "attainable_gflops,practical_gflops\n";
    samples = std::max(samples, 2);
    const double lo = std::log10(oi_min), hi = std::log10(oi_max);
    for (int i = 0; i < samples; ++i) {
        const double oi = std::pow(10.0, lo + (hi - lo) * i / (samples - 1));
        out += fmt(oi) + "," + fmt(cfg.memory_bandwidth() * oi / 1e9) + "," + fmt(cfg.peak_flops() / 1e9) + "," +
               fmt(cfg.peak_flops() * (1.0 - kPracticalConflictRate) / 1e9) + "," +
               fmt(roofline_attainable(cfg, oi)) + "," + fmt(roofline_practical(cfg, oi)) + "\n";
    }
    return out;
}

}  // namespace ntx
