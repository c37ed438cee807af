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

#include "ntx/error.hpp"

namespace ntx {

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument:
        return "invalid_argument";
    case ErrorCode::BusError:
        return "bus_error";
    case ErrorCode::DecodeError:
        return "decode_error";
    case ErrorCode::AddressFault:
        return "address_fault";
    case ErrorCode::PlanningError:
        return "planning_error";
    case ErrorCode::IoError:
        return "io_error";
    }
    return "unknown";
}

}  // namespace ntx
