#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mffssim {

inline constexpr const char* kThreadsEnv = "MFFSSIM_THREADS";

/// Worker count from MFFSSIM_THREADS; 1 when unset or invalid.
inline std::size_t thread_count() {
  const char* env = std::getenv(kThreadsEnv);
  if (env == nullptr) return 1;
  try {
    const long n = std::stol(env);
    return n > 0 ? static_cast<std::size_t>(n) : 1;
  } catch (...) {
    return 1;
  }
}

/// Splits [0, n) into `threads` contiguous chunks and runs
/// fn(chunk, begin, end) on each. The partition depends only on n and the
/// thread count, so reductions merged in chunk order are reproducible.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = n * t / threads;
    const std::size_t end = n * (t + 1) / threads;
    pool.emplace_back([&fn, t, begin, end] { fn(t, begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace mffssim
