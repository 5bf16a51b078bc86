// Copyright 2026 The rimseg Authors
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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>

#include <sys/resource.h>

namespace rimseg::acceptance {

struct Options {
  std::filesystem::path data_dir;  // tests/data
  std::filesystem::path work_dir;  // scratch space shared between criteria
  std::filesystem::path cli;       // the rimseg executable
  std::size_t threads = 0;         // 0: one per hardware thread
};

// Prints the single verdict line for a criterion; returns the exit code.
inline int verdict(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  return pass ? 0 : 1;
}

class Stopwatch {
 public:
  Stopwatch() : wall_(std::chrono::steady_clock::now()), cpu_(process_cpu_seconds()) {}
  double wall() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_).count();
  }
  double cpu() const { return process_cpu_seconds() - cpu_; }

  // User + system time of every thread in this process.
  static double process_cpu_seconds() {
    rusage u{};
    getrusage(RUSAGE_SELF, &u);
    auto secs = [](const timeval& t) { return static_cast<double>(t.tv_sec) + t.tv_usec * 1e-6; };
    return secs(u.ru_utime) + secs(u.ru_stime);
  }

 private:
  std::chrono::steady_clock::time_point wall_;
  double cpu_;
};

inline std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int gradients(const Options&);
int metric_oracles(const Options&);
int closed_forms(const Options&);
int trend_sweep(const Options&);
int trend(const Options&);
int progress(const Options&);
int comparison(const Options&);
int determinism(const Options&);
int properties(const Options&);

}  // namespace rimseg::acceptance
