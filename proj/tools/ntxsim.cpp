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

// ntxsim command-line front end. Talks to the simulator through the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ntx/ntx.h"
#include "ntx/validate.h"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct CliError {
    std::string code;
    std::string message;
};

[[noreturn]] void raise(const std::string& code, const std::string& message) { throw CliError{code, message}; }

void check(ntx_status st) {
    if (st != NTX_OK) {
        raise(ntx_status_name(st), ntx_last_error());
    }
}

std::string take(char* s) {
    std::string out = s != nullptr ? s : "";
    ntx_string_free(s);
    return out;
}

struct SimHandle {
    ntx_sim* p = nullptr;
    explicit SimHandle(const std::string& cfg) { check(ntx_sim_create(cfg.c_str(), &p)); }
    ~SimHandle() { ntx_sim_destroy(p); }
    SimHandle(const SimHandle&) = delete;
    SimHandle& operator=(const SimHandle&) = delete;
};

struct ResultHandle {
    ntx_result* p = nullptr;
    ResultHandle() = default;
    ~ResultHandle() { ntx_result_destroy(p); }
    ResultHandle(const ResultHandle&) = delete;
    ResultHandle& operator=(const ResultHandle&) = delete;
};

std::vector<uint64_t> parse_dims(const std::string& s) {
    std::vector<uint64_t> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        try {
            size_t used = 0;
            out.push_back(std::stoull(part, &used));
            if (used != part.size()) {
                throw std::invalid_argument(part);
            }
        } catch (const std::exception&) {
            raise("invalid_argument", "bad shape '" + s + "'; expected e.g. 128x128");
        }
    }
    if (out.empty()) {
        raise("invalid_argument", "empty shape");
    }
    return out;
}

// Flags shared by run, trace and sweep.
struct KernelFlags {
    std::string kernel;
    std::string shape;
    uint32_t ksize = 3;
    uint32_t c_in = 0;
    uint32_t c_out = 0;
    double alpha = 2.0;
    double nu = 0.0625;
    uint32_t tile_x = 0, tile_y = 0, tile_z = 0, block = 0, block_k = 0;

    void add(CLI::App* app, bool shape_required) {
        app->add_option("--kernel", kernel, "axpy, gemv, gemm, conv2d, laplace1d, laplace2d, laplace3d, diffusion");
        auto* s = app->add_option("--shape,--hw", shape,
                                  "n | MxN | MxNxK | HxW | DxHxW depending on the kernel");
        if (shape_required) {
            s->required();
        }
        app->add_option("--k", ksize, "convolution kernel size")->capture_default_str();
        app->add_option("--cin", c_in, "convolution input channels (default 1)");
        app->add_option("--cout", c_out, "convolution output channels (default 1)");
        app->add_option("--alpha", alpha, "AXPY scale")->capture_default_str();
        app->add_option("--nu", nu, "diffusion coefficient")->capture_default_str();
        app->add_option("--tile-x", tile_x, "tile width, 0 = planner");
        app->add_option("--tile-y", tile_y, "tile height, 0 = planner");
        app->add_option("--tile-z", tile_z, "tile depth, 0 = planner");
        app->add_option("--block", block, "GEMM output block edge");
        app->add_option("--block-k", block_k, "GEMM reduction block / GEMV column block");
    }

    json to_json(const std::string& kind, const std::string& shp) const {
        json j;
        j["kind"] = kind;
        const auto d = parse_dims(shp);
        auto need = [&](size_t n) {
            if (d.size() != n) {
                raise("invalid_argument", kind + " expects a shape with " + std::to_string(n) + " extents, got '" +
                                              shp + "'");
            }
        };
        if (kind == "axpy") {
            need(1);
            j["n"] = d[0];
            j["alpha"] = alpha;
        } else if (kind == "gemv") {
            need(2);
            j["m"] = d[0];
            j["n"] = d[1];
        } else if (kind == "gemm") {
            if (d.size() == 1) {
                j["m"] = j["n"] = j["k"] = d[0];
            } else {
                need(3);
                j["m"] = d[0];
                j["n"] = d[1];
                j["k"] = d[2];
            }
        } else if (kind == "conv2d" || kind == "laplace2d" || kind == "diffusion") {
            need(2);
            j["h"] = d[0];
            j["w"] = d[1];
            if (kind == "conv2d") {
                j["ksize"] = ksize;
                j["c_in"] = c_in != 0 ? c_in : 1;
                j["c_out"] = c_out != 0 ? c_out : 1;
            }
            if (kind == "diffusion") {
                j["nu"] = nu;
            }
        } else if (kind == "laplace1d") {
            need(1);
            j["w"] = d[0];
        } else if (kind == "laplace3d") {
            need(3);
            j["d"] = d[0];
            j["h"] = d[1];
            j["w"] = d[2];
        } else {
            j["kind"] = kind;  // let the library reject it with its own message
        }
        j["tile_x"] = tile_x;
        j["tile_y"] = tile_y;
        j["tile_z"] = tile_z;
        j["block"] = block;
        j["block_k"] = block_k;
        return j;
    }
};

struct ClusterFlags {
    std::string config_path;
    uint32_t axi_bits = 0;
    uint32_t n_ntx = 0;
    uint64_t seed = 1;
    bool normal = false;

    void add(CLI::App* app) {
        app->add_option("--config", config_path, "JSON file with \"cluster\", \"kernel\" and \"seed\" sections")
            ->check(CLI::ExistingFile);
        app->add_option("--axi-bits", axi_bits, "external port width override");
        app->add_option("--ntx", n_ntx, "number of NTX units override");
        app->add_option("--seed", seed, "input generator seed")->capture_default_str();
        app->add_flag("--normal", normal, "draw inputs from N(0,1) instead of U[-1,1)");
    }

    json file() const {
        if (config_path.empty()) {
            return json::object();
        }
        std::ifstream f(config_path);
        try {
            return json::parse(f);
        } catch (const json::exception& e) {
            raise("invalid_argument", "'" + config_path + "': " + e.what());
        }
    }

    std::string cluster_json(bool trace) const {
        json f = file();
        json c = f.contains("cluster") ? f["cluster"] : json::object();
        if (axi_bits != 0) {
            c["dma"]["axi_bits"] = axi_bits;
        }
        if (n_ntx != 0) {
            c["n_ntx"] = n_ntx;
        }
        if (trace) {
            c["trace"] = true;
        }
        return c.dump();
    }
};

std::string out_dir(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    const char* env = std::getenv("NTXSIM_OUT_DIR");
    return env != nullptr ? env : "";
}

fs::path prepare_dir(const std::string& dir) {
    fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) {
        raise("io_error", "cannot create '" + p.string() + "': " + ec.message());
    }
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
    if (!f) {
        raise("io_error", "cannot write '" + p.string() + "'");
    }
}

json kernel_json(const KernelFlags& kf, const ClusterFlags& cf) {
    const json f = cf.file();
    if (kf.kernel.empty()) {
        if (!f.contains("kernel")) {
            raise("invalid_argument", "no kernel given; use --kernel or a config file with a \"kernel\" section");
        }
        return f["kernel"];
    }
    if (kf.shape.empty()) {
        raise("invalid_argument", "--shape is required with --kernel");
    }
    return kf.to_json(kf.kernel, kf.shape);
}

void run_one(const KernelFlags& kf, const ClusterFlags& cf, bool trace, const std::vector<std::string>& inputs,
             ResultHandle& result) {
    SimHandle sim(cf.cluster_json(trace));
    const std::string kj = kernel_json(kf, cf).dump();
    uint64_t seed = cf.seed;
    const json f = cf.file();
    if (f.contains("seed") && cf.seed == 1) {
        seed = f["seed"].get<uint64_t>();
    }
    if (inputs.empty()) {
        check(ntx_sim_run_kernel(sim.p, kj.c_str(), seed, cf.normal ? 1 : 0, &result.p));
        return;
    }
    std::vector<std::string> names;
    std::vector<ntx_array*> arrays;
    std::vector<const float*> data;
    std::vector<uint64_t> lengths;
    struct Cleanup {
        std::vector<ntx_array*>& a;
        ~Cleanup() {
            for (ntx_array* p : a) {
                ntx_array_destroy(p);
            }
        }
    } cleanup{arrays};
    for (const std::string& spec : inputs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            raise("invalid_argument", "--input expects name=path, got '" + spec + "'");
        }
        names.push_back(spec.substr(0, eq));
        ntx_array* a = nullptr;
        check(ntx_array_load(spec.substr(eq + 1).c_str(), &a));
        arrays.push_back(a);
        const float* d = nullptr;
        uint64_t n = 0;
        check(ntx_array_data_f32(a, &d, &n));
        data.push_back(d);
        lengths.push_back(n);
    }
    std::vector<const char*> cnames;
    for (const auto& n : names) {
        cnames.push_back(n.c_str());
    }
    check(ntx_sim_run_kernel_inputs(sim.p, kj.c_str(), names.size(), cnames.data(), data.data(), lengths.data(),
                                    &result.p));
}

int cmd_run(const KernelFlags& kf, const ClusterFlags& cf, const std::vector<std::string>& inputs,
            const std::string& dir_flag, bool dump, bool verify) {
    ResultHandle r;
    run_one(kf, cf, false, inputs, r);
    ordered_json report = ordered_json::parse(take([&] {
        char* s = nullptr;
        check(ntx_result_report_json(r.p, &s));
        return s;
    }()));
    if (verify) {
        uint64_t bad = 0;
        check(ntx_result_reference_mismatches(r.p, &bad));
        report["reference_mismatches"] = bad;
    }
    const std::string dir = out_dir(dir_flag);
    if (!dir.empty() || dump) {
        const fs::path p = prepare_dir(dir);
        write_file(p / "report.json", report.dump(2) + "\n");
        if (dump) {
            const float* data = nullptr;
            uint64_t count = 0;
            const uint64_t* shape = nullptr;
            size_t ndim = 0;
            check(ntx_result_output(r.p, &data, &count));
            check(ntx_result_output_shape(r.p, &shape, &ndim));
            check(ntx_array_save_f32((p / "output.ntxa").string().c_str(), shape, ndim, data));
            char* names = nullptr;
            check(ntx_kernel_inputs_json(kernel_json(kf, cf).dump().c_str(), &names));
            const json in = json::parse(take(names));
            for (auto it = in.begin(); it != in.end(); ++it) {
                const auto dims = it.value().get<std::vector<uint64_t>>();
                check(ntx_result_input(r.p, it.key().c_str(), &data, &count));
                check(ntx_array_save_f32((p / ("input_" + it.key() + ".ntxa")).string().c_str(), dims.data(),
                                         dims.size(), data));
            }
        }
    }
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_trace(const KernelFlags& kf, const ClusterFlags& cf, const std::string& dir_flag) {
    ResultHandle r;
    run_one(kf, cf, true, {}, r);
    char* s = nullptr;
    check(ntx_result_trace_jsonl(r.p, &s));
    const std::string text = take(s);
    const std::string dir = out_dir(dir_flag);
    if (!dir.empty()) {
        write_file(prepare_dir(dir) / "trace.jsonl", text);
    } else {
        std::cout << text;
    }
    return 0;
}

struct SweepItem {
    std::string kernel;
    std::string shape;
    uint32_t ksize = 3;
};

// Default kernel set of the roofline plot.
std::vector<SweepItem> default_sweep(bool quick) {
    if (quick) {
        return {{"axpy", "65536"},        {"gemv", "512x512"},   {"gemm", "128x128x128"},
                {"conv2d", "64x64", 3},   {"conv2d", "64x64", 5}, {"conv2d", "64x64", 7},
                {"laplace1d", "65536"},   {"laplace2d", "128x128"}, {"laplace3d", "32x32x32"},
                {"diffusion", "128x128"}};
    }
    return {{"axpy", "4096"},         {"axpy", "65536"},          {"axpy", "1048576"},
            {"gemv", "256x256"},      {"gemv", "1024x1024"},      {"gemv", "4096x4096"},
            {"gemm", "64x64x64"},     {"gemm", "128x128x128"},    {"gemm", "256x256x256"},
            {"conv2d", "128x128", 3}, {"conv2d", "128x128", 5},   {"conv2d", "128x128", 7},
            {"laplace1d", "1048576"}, {"laplace2d", "512x512"},   {"laplace3d", "64x64x64"},
            {"diffusion", "512x512"}};
}

std::vector<ordered_json> sweep_points(const KernelFlags& base, const ClusterFlags& cf,
                                       const std::vector<SweepItem>& items, unsigned jobs) {
    std::vector<ordered_json> points(items.size());
    std::vector<CliError> errors;
    std::mutex mu;
    size_t next = 0;
    auto worker = [&] {
        for (;;) {
            size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= items.size() || !errors.empty()) {
                    return;
                }
                i = next++;
            }
            try {
                KernelFlags kf = base;
                kf.kernel = items[i].kernel;
                kf.shape = items[i].shape;
                kf.ksize = items[i].ksize;
                if (kf.kernel == "conv2d") {
                    kf.c_in = base.c_in != 0 ? base.c_in : 8;
                    kf.c_out = base.c_out != 0 ? base.c_out : 8;
                }
                ResultHandle r;
                run_one(kf, cf, false, {}, r);
                char* s = nullptr;
                check(ntx_result_roofline_json(r.p, &s));
                points[i] = ordered_json::parse(take(s));
            } catch (const CliError& e) {
                std::lock_guard<std::mutex> lock(mu);
                errors.push_back(e);
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::max(1u, jobs); ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (!errors.empty()) {
        throw errors.front();
    }
    return points;
}

std::string points_csv(const std::vector<ordered_json>& points) {
    std::string out = "kernel,oi_flop_per_byte,achieved_gflops,attainable_gflops,practical_gflops,bound,utilization\n";
    for (const auto& p : points) {
        char buf[512];
        std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g,%.6g,%s,%.6g\n", p["kernel"].get<std::string>().c_str(),
                      p["oi"].get<double>(), p["achieved_gflops"].get<double>(), p["attainable_gflops"].get<double>(),
                      p["practical_gflops"].get<double>(), p["bound"].get<std::string>().c_str(),
                      p["utilization"].get<double>());
        out += buf;
    }
    return out;
}

std::vector<SweepItem> sweep_items(const KernelFlags& kf, const std::vector<std::string>& shapes, bool quick) {
    if (kf.kernel.empty()) {
        return default_sweep(quick);
    }
    if (shapes.empty()) {
        raise("invalid_argument", "--shapes is required when --kernel is given");
    }
    std::vector<SweepItem> items;
    for (const auto& s : shapes) {
        items.push_back({kf.kernel, s, kf.ksize});
    }
    return items;
}

int cmd_sweep(const KernelFlags& kf, const ClusterFlags& cf, const std::vector<std::string>& shapes, unsigned jobs,
              bool quick, const std::string& dir_flag) {
    const auto points = sweep_points(kf, cf, sweep_items(kf, shapes, quick), jobs);
    const std::string csv = points_csv(points);
    const std::string dir = out_dir(dir_flag);
    if (!dir.empty()) {
        write_file(prepare_dir(dir) / "sweep.csv", csv);
    }
    std::cout << csv;
    return 0;
}

int cmd_roofline(const KernelFlags& kf, const ClusterFlags& cf, double oi_min, double oi_max, int samples,
                 unsigned jobs, bool quick, bool no_points, const std::string& dir_flag) {
    SimHandle sim(cf.cluster_json(false));
    char* s = nullptr;
    check(ntx_roofline_csv(sim.p, oi_min, oi_max, samples, &s));
    const std::string roofs = take(s);
    std::string pts;
    std::vector<ordered_json> points;
    if (!no_points) {
        points = sweep_points(kf, cf, default_sweep(quick), jobs);
        pts = points_csv(points);
    }
    const fs::path dir = prepare_dir(out_dir(dir_flag));
    write_file(dir / "roofline_roofs.csv", roofs);
    if (!no_points) {
        write_file(dir / "roofline_points.csv", pts);
    }
    ordered_json summary;
    summary["schema"] = "ntxsim.roofline.v1";
    summary["memory_roof_gbs"] = ntx_roofline_attainable(sim.p, 1.0);
    summary["peak_gflops"] = ntx_roofline_attainable(sim.p, 1e9);
    summary["practical_peak_gflops"] = ntx_roofline_practical(sim.p, 1e9);
    summary["roofs_csv"] = (dir / "roofline_roofs.csv").string();
    if (!no_points) {
        summary["points_csv"] = (dir / "roofline_points.csv").string();
        summary["points"] = points;
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_validate(const std::vector<std::string>& only, uint64_t seed, const std::string& dir_flag) {
    json opt;
    opt["seed"] = seed;
    if (!only.empty()) {
        opt["only"] = only;
    }
    char* s = nullptr;
    int passed = 0;
    check(ntx_validate(opt.dump().c_str(), &s, &passed));
    const std::string text = take(s);
    const json report = json::parse(text);
    for (const auto& c : report["criteria"]) {
        std::cout << c["id"].get<std::string>() << " " << (c["passed"].get<bool>() ? "PASS" : "FAIL") << " "
                  << c["name"].get<std::string>() << ": " << c["summary"].get<std::string>() << "\n";
    }
    const std::string dir = out_dir(dir_flag);
    if (!dir.empty()) {
        write_file(prepare_dir(dir) / "validate.json", text + "\n");
    }
    return passed != 0 ? 0 : 1;
}

void print_error(const std::string& code, const std::string& message) {
    ordered_json e;
    e["error"] = {{"code", code}, {"message", message}};
    std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ntxsim: cycle-level simulator of an NTX floating-point streaming cluster"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ntx_version()));

    KernelFlags kf;
    ClusterFlags cf;
    std::string dir;
    std::vector<std::string> inputs, shapes, only;
    bool dump = false, verify = false, quick = false, no_points = false;
    unsigned jobs = 1;
    double oi_min = 1.0 / 16, oi_max = 64.0;
    int samples = 64;

    auto* run = app.add_subcommand("run", "run one kernel and print its performance report");
    kf.add(run, false);
    cf.add(run);
    run->add_option("--input", inputs, "name=path of an NTXARR01 array replacing a generated input");
    run->add_option("--out", dir, "output directory (default: $NTXSIM_OUT_DIR)");
    run->add_flag("--dump", dump, "write inputs and output as array containers");
    run->add_flag("--verify", verify, "count output elements differing from the scalar reference");

    auto* trace = app.add_subcommand("trace", "run one kernel and emit its event trace as JSON lines");
    kf.add(trace, false);
    cf.add(trace);
    trace->add_option("--out", dir, "write trace.jsonl here instead of stdout");

    auto* sweep = app.add_subcommand("sweep", "run a set of shapes and print roofline points as CSV");
    kf.add(sweep, false);
    sweep->remove_option(sweep->get_option("--shape"));
    cf.add(sweep);
    sweep->add_option("--shapes", shapes, "comma separated shapes for --kernel")->delimiter(',');
    sweep->add_option("--jobs,-j", jobs, "simulations run in parallel")->capture_default_str();
    sweep->add_flag("--quick", quick, "smaller default shapes");
    sweep->add_option("--out", dir, "also write sweep.csv here");

    auto* roof = app.add_subcommand("roofline", "write roof lines and the default kernel points as CSV");
    KernelFlags roof_kf;
    cf.add(roof);
    roof->add_option("--oi-min", oi_min, "smallest operational intensity")->capture_default_str();
    roof->add_option("--oi-max", oi_max, "largest operational intensity")->capture_default_str();
    roof->add_option("--samples", samples, "roof samples")->capture_default_str();
    roof->add_option("--jobs,-j", jobs, "simulations run in parallel")->capture_default_str();
    roof->add_flag("--quick", quick, "smaller kernel shapes");
    roof->add_flag("--no-points", no_points, "roof lines only");
    roof->add_option("--out", dir, "output directory (default: $NTXSIM_OUT_DIR or .)");

    auto* val = app.add_subcommand("validate", "run the acceptance suite; exit status 0 iff all pass");
    uint64_t vseed = 1;
    val->add_option("--only", only, "criteria ids, e.g. AC1,AC3")->delimiter(',');
    val->add_option("--seed", vseed, "suite seed")->capture_default_str();
    val->add_option("--out", dir, "also write validate.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage_error", e.what());
        return 2;
    }

    try {
        if (*run) {
            return cmd_run(kf, cf, inputs, dir, dump, verify);
        }
        if (*trace) {
            return cmd_trace(kf, cf, dir);
        }
        if (*sweep) {
            return cmd_sweep(kf, cf, shapes, jobs, quick, dir);
        }
        if (*roof) {
            return cmd_roofline(roof_kf, cf, oi_min, oi_max, samples, jobs, quick, no_points, dir);
        }
        if (*val) {
            return cmd_validate(only, vseed, dir);
        }
    } catch (const CliError& e) {
        print_error(e.code, e.message);
        return 2;
    } catch (const std::exception& e) {
        print_error("internal_error", e.what());
        return 2;
    }
    return 0;
}
