#pragma once

// Thread ceiling and a deterministic parallel loop. Workers write to
// disjoint slots only; any reduction happens afterwards in index order, so
// results are bitwise independent of the thread count.

#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace surreal {

/// Worker cap from the SURREAL_THREADS environment variable; 1 when unset or
/// unparseable. Never exceeds the hardware concurrency.
inline std::size_t thread_cap() {
  const char* env = std::getenv("SURREAL_THREADS");
  std::size_t n = 1;
  if (env != nullptr) {
    try {
      const long v = std::stol(env);
      if (v > 0) n = static_cast<std::size_t>(v);
    } catch (...) {
      n = 1;
    }
  }
  const std::size_t hw = std::thread::hardware_concurrency();
  if (hw > 0 && n > hw) n = hw;
  return n;
}

/// Splits [0, n) into at most `threads` contiguous chunks and runs
/// body(worker, begin, end) for each on its own thread. Workers may keep
/// per-worker scratch indexed by the worker id.
template <class F>
void parallel_chunks(std::size_t n, std::size_t threads, F&& body) {
  if (n == 0) return;
  const std::size_t workers = threads < n ? (threads < 1 ? 1 : threads) : n;
  if (workers <= 1) {
    body(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = begin + chunk < n ? begin + chunk : n;
    if (begin >= end) break;
    pool.emplace_back([&body, w, begin, end] { body(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

/// Runs body(i) for i in [0, n) on up to `threads` workers in contiguous
/// chunks. body must only touch state owned by index i.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  parallel_chunks(n, threads,
                  [&body](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) body(i);
                  });
}

}  // namespace surreal
