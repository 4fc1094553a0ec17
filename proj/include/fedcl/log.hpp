// Copyright 2026 The FedCL Authors. All Rights Reserved.
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

#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace fedcl {

enum class LogLevel { debug = 0, info = 1, warning = 2, off = 3 };

namespace detail {
inline std::atomic<LogLevel>& log_threshold() {
  static std::atomic<LogLevel> level{LogLevel::warning};
  return level;
}
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline void set_log_level(LogLevel level) { detail::log_threshold() = level; }

inline void log(LogLevel level, std::string_view msg) {
  if (level < detail::log_threshold().load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warning", "off"};
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  std::clog << "[fedcl " << kNames[static_cast<int>(level)] << "] " << msg << '\n';
}

}  // namespace fedcl
