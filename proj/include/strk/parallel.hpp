#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace strk {

inline int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is split into
// contiguous chunks; each index must write only its own output slot, which
// keeps results identical for any job count. The first exception thrown by a
// worker is rethrown.
inline void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  jobs = std::min<size_t>(resolve_jobs(jobs), n);
  if (jobs <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  const size_t chunk = (n + jobs - 1) / jobs;
  for (int w = 0; w < jobs; ++w) {
    const size_t begin = w * chunk;
    const size_t end = std::min(n, begin + chunk);
    workers.emplace_back([&, w, begin, end] {
      try {
        for (size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace strk
