#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace gpsobol {

/// Runs fn(lo, hi) over a partition of [0, n) on `threads` workers.
/// Chunks are disjoint, so writes to per-index slots need no locking;
/// the partition is a pure function of (n, threads), keeping results
/// deterministic for any scheduling.
inline void parallel_chunks(int n, int threads,
                            const std::function<void(int, int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int base = n / threads, rem = n % threads;
  int lo = 0;
  for (int t = 0; t < threads; ++t) {
    const int hi = lo + base + (t < rem ? 1 : 0);
    pool.emplace_back(fn, lo, hi);
    lo = hi;
  }
  for (auto& th : pool) th.join();
}

}  // namespace gpsobol
