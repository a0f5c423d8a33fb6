#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace gridfail {

// Runs fn(i) for i in [0, n). Work is split into fixed contiguous chunks so
// results depend only on inputs, never on scheduling. fn must write to
// disjoint slots.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += nw) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace gridfail
