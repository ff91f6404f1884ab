#include "radon/common.hpp"

#include <atomic>
#include <thread>

namespace radon {

namespace {
std::atomic<int> g_num_threads{1};
}

void set_num_threads(int n) {
  if (n < 1) throw ConfigError("threads must be >= 1");
  g_num_threads.store(n);
}

int num_threads() { return g_num_threads.load(); }

void parallel_for(size_t count, const std::function<void(size_t)>& fn) {
  const int workers = num_threads();
  if (workers <= 1 || count < 2) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const size_t nw = std::min<size_t>(static_cast<size_t>(workers), count);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      // Contiguous chunks; every index has exactly one writer.
      const size_t lo = count * w / nw;
      const size_t hi = count * (w + 1) / nw;
      for (size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace radon
