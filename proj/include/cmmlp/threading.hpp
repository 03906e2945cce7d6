#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace cmmlp {

// Worker cap: CMMLP_THREADS env var, else hardware concurrency.
inline int max_threads() {
  if (const char* env = std::getenv("CMMLP_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

inline bool deterministic_env() {
  const char* env = std::getenv("CMMLP_DETERMINISTIC");
  return env != nullptr && std::string_view(env) == "1";
}

// Static contiguous partition; f(i) must write only to per-index slots so
// results are identical for any thread count.
template <typename F>
inline void parallel_for(int64_t n, F&& f, int threads = -1) {
  if (threads < 1) threads = max_threads();
  threads = static_cast<int>(std::min<int64_t>(threads, n));
  if (threads <= 1) {
    for (int64_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  int64_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int64_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &f] {
      for (int64_t i = lo; i < hi; ++i) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace cmmlp
