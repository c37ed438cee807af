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

// Prints one line per acceptance criterion; exits non-zero if any fails.

#include <cstdio>
#include <string>

#include <json.hpp>

#include "ntx/validate.h"

int main(int argc, char** argv) {
    std::string options = "{}";
    if (argc > 1) {
        nlohmann::json opt;
        opt["only"] = nlohmann::json::array();
        for (int i = 1; i < argc; ++i) {
            opt["only"].push_back(argv[i]);
        }
        options = opt.dump();
    }
    char* report = nullptr;
    int passed = 0;
    const ntx_status st = ntx_validate(options.c_str(), &report, &passed);
    if (st != NTX_OK) {
        std::printf("acceptance suite failed to run: %s\n", ntx_status_name(st));
        return 2;
    }
    const auto j = nlohmann::json::parse(report);
    ntx_string_free(report);
    for (const auto& c : j["criteria"]) {
        std::printf("%s %s %s: %s [%.1f s]\n", c["id"].get<std::string>().c_str(),
                    c["passed"].get<bool>() ? "PASS" : "FAIL", c["name"].get<std::string>().c_str(),
                    c["summary"].get<std::string>().c_str(), c["seconds"].get<double>());
    }
    std::fflush(stdout);
    return passed != 0 ? 0 : 1;
}
