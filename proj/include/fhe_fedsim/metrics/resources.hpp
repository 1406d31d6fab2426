/*
 * Copyright 2026 The fhe-fedsim Authors.
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

#pragma once

#include <pthread.h>
#include <time.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fhe_fedsim/common/error.hpp"

namespace fhe_fedsim::metrics {

struct ResourceSample {
  double time_s = 0.0;  // since the sampler was created
  std::string role;     // "central" or "client<k>"
  std::optional<double> rss_mb;
  std::optional<double> vms_mb;
  std::optional<double> cpu_percent;  // of one core, over the last period
};

struct MemoryUsage {
  double rss_mb = 0.0;
  double vms_mb = 0.0;
};

// Resident and virtual size of the whole process from /proc/self/statm;
// empty where that file does not exist.
inline std::optional<MemoryUsage> process_memory() {
  std::ifstream statm("/proc/self/statm");
  unsigned long long size = 0, resident = 0;
  if (!(statm >> size >> resident)) return std::nullopt;
  const double page_mb = static_cast<double>(sysconf(_SC_PAGESIZE)) / (1024.0 * 1024.0);
  return MemoryUsage{static_cast<double>(resident) * page_mb, static_cast<double>(size) * page_mb};
}

inline std::optional<double> thread_cpu_seconds(clockid_t clock) {
  timespec ts{};
  if (clock_gettime(clock, &ts) != 0) return std::nullopt;
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

// Periodic sampler. Every party runs on its own thread inside one process,
// so memory figures are process-wide while CPU use is attributed per role
// through each registered thread's CPU clock.
class ResourceSampler {
 public:
  explicit ResourceSampler(double period_s)
      : period_(period_s), origin_(std::chrono::steady_clock::now()) {
    if (!(period_s > 0.0)) throw ConfigError("sample_period", "must be positive");
  }

  ~ResourceSampler() { stop(); }

  ResourceSampler(const ResourceSampler&) = delete;
  ResourceSampler& operator=(const ResourceSampler&) = delete;

  double now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
  }

  // Call from the thread that acts as `role`.
  void register_current_thread(std::string role) {
    Tracked t;
    t.role = std::move(role);
    t.valid = pthread_getcpuclockid(pthread_self(), &t.clock) == 0;
    t.last_wall = now();
    if (t.valid) t.last_cpu = thread_cpu_seconds(t.clock).value_or(0.0);
    std::lock_guard lock(mutex_);
    tracked_.push_back(std::move(t));
  }

  // Call from a registered thread before it exits.
  void unregister_current_thread() {
    const pthread_t self = pthread_self();
    std::lock_guard lock(mutex_);
    for (auto& t : tracked_) {
      clockid_t c;
      if (t.valid && pthread_getcpuclockid(self, &c) == 0 && c == t.clock) t.valid = false;
    }
  }

  void start() {
    std::lock_guard lock(mutex_);
    if (worker_.joinable()) return;
    stopping_ = false;
    worker_ = std::thread([this] { loop(); });
  }

  void stop() {
    {
      std::lock_guard lock(mutex_);
      if (!worker_.joinable()) return;
      stopping_ = true;
    }
    wake_.notify_all();
    worker_.join();
  }

  // One sample per registered role at the current instant.
  void sample_now() {
    std::lock_guard lock(mutex_);
    take_locked();
  }

  std::vector<ResourceSample> samples() const {
    std::lock_guard lock(mutex_);
    return samples_;
  }

 private:
  struct Tracked {
    std::string role;
    clockid_t clock{};
    bool valid = false;
    double last_wall = 0.0;
    double last_cpu = 0.0;
  };

  void loop() {
    std::unique_lock lock(mutex_);
    auto next = std::chrono::steady_clock::now();
    const auto step = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(period_));
    while (true) {
      next += step;
      if (wake_.wait_until(lock, next, [this] { return stopping_; })) return;
      take_locked();
    }
  }

  void take_locked() {
    const double t = now();
    const auto mem = process_memory();
    for (auto& tr : tracked_) {
      ResourceSample s;
      s.time_s = t;
      s.role = tr.role;
      if (mem) {
        s.rss_mb = mem->rss_mb;
        s.vms_mb = mem->vms_mb;
      }
      if (tr.valid) {
        if (const auto cpu = thread_cpu_seconds(tr.clock)) {
          const double dw = t - tr.last_wall;
          if (dw > 0) s.cpu_percent = std::max(0.0, (*cpu - tr.last_cpu) / dw * 100.0);
          tr.last_cpu = *cpu;
          tr.last_wall = t;
        }
      }
      samples_.push_back(std::move(s));
    }
  }

  double period_;
  std::chrono::steady_clock::time_point origin_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  bool stopping_ = false;
  std::thread worker_;
  std::vector<Tracked> tracked_;
  std::vector<ResourceSample> samples_;
};

}  // namespace fhe_fedsim::metrics
