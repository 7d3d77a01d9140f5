// parallel.hpp - deterministic helpers for data-parallel loops.
//
// Work is always split into fixed-size chunks that do not depend on the
// thread count; threads pull chunks from an atomic counter. A loop whose
// body writes only its own elements therefore produces bitwise identical
// results for any number of threads, and reductions stay reproducible by
// combining per-chunk partials in chunk order.
#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace salvox {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Calls fn(chunk_index, begin, end) for consecutive ranges of size
// chunk_size covering [0, n). Chunk boundaries are independent of the
// thread count.
template <typename Fn>
void parallel_chunks(std::int64_t n, std::int64_t chunk_size, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (chunk_size <= 0) chunk_size = 1;
  const std::int64_t num_chunks = (n + chunk_size - 1) / chunk_size;
  threads = resolve_threads(threads);
  if (threads <= 1 || num_chunks == 1) {
    for (std::int64_t c = 0; c < num_chunks; ++c) {
      std::int64_t lo = c * chunk_size;
      std::int64_t hi = lo + chunk_size < n ? lo + chunk_size : n;
      fn(c, lo, hi);
    }
    return;
  }
  std::atomic<std::int64_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::int64_t c = next.fetch_add(1);
      if (c >= num_chunks) return;
      std::int64_t lo = c * chunk_size;
      std::int64_t hi = lo + chunk_size < n ? lo + chunk_size : n;
      fn(c, lo, hi);
    }
  };
  std::vector<std::thread> pool;
  int spawn = threads < static_cast<int>(num_chunks) ? threads : static_cast<int>(num_chunks);
  pool.reserve(static_cast<size_t>(spawn));
  for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Element-wise loop: fn(i) for i in [0, n). fn must touch only state owned
// by element i.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  const std::int64_t chunk = 256;
  parallel_chunks(n, chunk, threads, [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) fn(i);
  });
}

}  // namespace salvox
