// Copyright 2026 The FHA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FHA_CORE_LOG_HPP_
#define FHA_CORE_LOG_HPP_

#include <string_view>

namespace fha {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Initialized from FHA_LOG (error|info|debug, default error).
LogLevel GetLogLevel();
void SetLogLevel(LogLevel level);
bool ParseLogLevel(std::string_view text, LogLevel* out);

void Log(LogLevel level, std::string_view message);

}  // namespace fha

#endif  // FHA_CORE_LOG_HPP_
