#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace yflow {

// Worker count: YFLOW_THREADS if set (clamped to >= 1), else hardware_concurrency.
inline int thread_count() {
  static int cached = [] {
    if (const char* env = std::getenv("YFLOW_THREADS")) {
      int n = std::atoi(env);
      return n >= 1 ? n : 1;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc >= 1 ? static_cast<int>(hc) : 1;
  }();
  return cached;
}

// Deterministic parallel map over [0, n): the index range is split into fixed
// contiguous chunks owned by worker id, so each index is processed by the same
// owner regardless of timing, and workers never write the same element. Any
// reduction over results must still happen in index order on the caller side;
// every numeric result is bitwise independent of the worker count because
// per-index work is pure.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
  if (n == 0) return;
  int workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    std::size_t lo = static_cast<std::size_t>(w) * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace yflow
