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

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ntx/cluster.hpp"
#include "ntx/kernels.hpp"

namespace ntx {

inline constexpr std::string_view kReportSchema = "ntxsim.report.v1";
inline constexpr std::string_view kRooflineSchema = "ntxsim.roofline.v1";

/// Fraction of TCDM requests assumed to lose arbitration when drawing the practical roof.
inline constexpr double kPracticalConflictRate = 0.13;

enum class Bound : uint8_t { Compute, Memory };

std::string_view bound_name(Bound b);

struct RooflinePoint {
    std::string label;
    double oi = 0.0;                // flop per byte
    double achieved_gflops = 0.0;
    Bound bound = Bound::Compute;
    double utilization = 0.0;
    double attainable_gflops = 0.0;
    double practical_gflops = 0.0;
};

/// min(peak, bandwidth x OI) in Gflop/s.
double roofline_attainable(const ClusterConfig& cfg, double oi);

/// Like roofline_attainable with the compute roof scaled by (1 - conflict_rate).
double roofline_practical(const ClusterConfig& cfg, double oi, double conflict_rate = kPracticalConflictRate);

/// Operational intensity where the memory roof meets the compute roof.
double ridge_point(const ClusterConfig& cfg);

RooflinePoint roofline_point(const std::string& label, const PerfReport& report, const ClusterConfig& cfg);

nlohmann::ordered_json report_json(const PerfReport& report, const ClusterConfig& cfg);
nlohmann::ordered_json kernel_report_json(const KernelRun& run, const ClusterConfig& cfg);
nlohmann::ordered_json roofline_point_json(const RooflinePoint& p);

std::string roofline_csv_header();
std::string roofline_csv_row(const RooflinePoint& p);

/// Log-spaced roof samples between oi_min and oi_max, one CSV line each.
std::string roof_lines_csv(const ClusterConfig& cfg, double oi_min, double oi_max, int samples);

}  // namespace ntx
