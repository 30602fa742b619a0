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

#include "log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace fha {

namespace {

LogLevel LevelFromEnv() {
  LogLevel level = LogLevel::kError;
  if (const char* env = std::getenv("FHA_LOG")) ParseLogLevel(env, &level);
  return level;
}

std::atomic<int>& LevelStorage() {
  static std::atomic<int> level{static_cast<int>(LevelFromEnv())};
  return level;
}

std::mutex& StderrMutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

LogLevel GetLogLevel() { return static_cast<LogLevel>(LevelStorage().load()); }

void SetLogLevel(LogLevel level) { LevelStorage().store(static_cast<int>(level)); }

bool ParseLogLevel(std::string_view text, LogLevel* out) {
  if (text == "error") {
    *out = LogLevel::kError;
  } else if (text == "info") {
    *out = LogLevel::kInfo;
  } else if (text == "debug") {
    *out = LogLevel::kDebug;
  } else {
    return false;
  }
  return true;
}

void Log(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) > LevelStorage().load()) return;
  static constexpr const char* kTags[] = {"error", "info", "debug"};
  std::lock_guard<std::mutex> lock(StderrMutex());
  std::cerr << "[fha " << kTags[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace fha
