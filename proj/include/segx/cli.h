/*
 * Copyright 2026 The SegX Toolkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SEGX_CLI_H_
#define SEGX_CLI_H_

#include <string>
#include <vector>

namespace segx::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;      // argument or configuration error
inline constexpr int kExitData = 3;       // data or format error
inline constexpr int kExitNumerical = 4;  // numerical failure

inline constexpr const char* kToolVersion = "0.1.0";

// Entry point shared by the segx binary and the tests. args[0] is the
// program name.
int Run(const std::vector<std::string>& args);

}  // namespace segx::cli

#endif  // SEGX_CLI_H_
