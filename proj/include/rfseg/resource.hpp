#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rfseg/error.hpp"

namespace rfseg {

/// Current resident set size in bytes, 0 when the platform offers no reading.
inline std::uint64_t resident_bytes() {
  std::ifstream in("/proc/self/statm");
  std::uint64_t size = 0, resident = 0;
  if (!(in >> size >> resident)) return 0;
  return resident * static_cast<std::uint64_t>(::sysconf(_SC_PAGESIZE));
}

/// Kernel-tracked high-water mark of the resident set (VmHWM), 0 if absent.
inline std::uint64_t resident_high_water_bytes() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      unsigned long long kb = 0;
      if (std::sscanf(line.c_str() + 6, "%llu", &kb) == 1) return kb * 1024ULL;
    }
  }
  return 0;
}

/// Background thread polling the resident set size. The default period of
/// 50 ms gives 20 samples per second.
class ResourceSampler {
 public:
  explicit ResourceSampler(std::chrono::milliseconds period = std::chrono::milliseconds(50)) : period_(period) {
    if (period_.count() <= 0 || period_.count() > 100)
      throw Error(ErrorCode::InvalidArgument, "sampling period must be in (0, 100] ms");
  }
  ResourceSampler(const ResourceSampler&) = delete;
  ResourceSampler& operator=(const ResourceSampler&) = delete;
  ~ResourceSampler() { stop(); }

  void start() {
    stop();
    peak_ = resident_bytes();
    samples_ = 1;
    running_ = true;
    thread_ = std::thread([this] {
      std::unique_lock lock(mutex_);
      while (running_) {
        cv_.wait_for(lock, period_, [this] { return !running_; });
        const auto rss = resident_bytes();
        peak_ = std::max(peak_.load(), rss);
        ++samples_;
      }
    });
  }

  /// Stops polling; returns the peak observed across all samples.
  std::uint64_t stop() {
    if (thread_.joinable()) {
      {
        std::lock_guard lock(mutex_);
        running_ = false;
      }
      cv_.notify_all();
      thread_.join();
      peak_ = std::max(peak_.load(), resident_bytes());
      ++samples_;
    }
    return peak_;
  }

  std::uint64_t peak() const { return peak_; }
  std::uint64_t samples() const { return samples_; }

 private:
  std::chrono::milliseconds period_;
  std::thread thread_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool running_ = false;
  std::atomic<std::uint64_t> peak_{0};
  std::atomic<std::uint64_t> samples_{0};
};

struct PhaseRecord {
  std::string model;
  std::string phase;  // preprocess | train | predict
  double wall_seconds = 0.0;
  std::uint64_t peak_resident_bytes = 0;
  std::uint64_t samples = 0;
};

/// Runs `fn` under a sampler and appends one record.
template <typename Fn>
decltype(auto) measure_phase(std::vector<PhaseRecord>& records, std::string model, std::string phase, Fn&& fn) {
  ResourceSampler sampler;
  sampler.start();
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&] {
    const auto t1 = std::chrono::steady_clock::now();
    const auto peak = sampler.stop();
    records.push_back({std::move(model), std::move(phase), std::chrono::duration<double>(t1 - t0).count(), peak,
                       sampler.samples()});
  };
  if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
    std::forward<Fn>(fn)();
    finish();
  } else {
    auto result = std::forward<Fn>(fn)();
    finish();
    return result;
  }
}

/// model,phase,wall_seconds,peak_resident_bytes
inline void emit_resource_csv(const std::vector<PhaseRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "model,phase,wall_seconds,peak_resident_bytes\n";
  for (const auto& r : records) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", r.wall_seconds);
    out << r.model << ',' << r.phase << ',' << buf << ',' << r.peak_resident_bytes << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace rfseg
