#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rigrecon {

// Number of worker threads used by the parallel loops. 0 means "hardware".
inline int& thread_budget() {
  static int budget = 0;
  return budget;
}

inline int effective_threads() {
  int n = thread_budget();
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

// Runs fn(i) for i in [0, count). Work is split into contiguous chunks, one per
// thread. Callers write results into per-index slots so the outcome does not
// depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const int threads = std::min<int>(effective_threads(), static_cast<int>(std::max<std::size_t>(count, 1)));
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, t, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace rigrecon
