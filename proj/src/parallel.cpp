#include "sfrecon/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace sfr {

int worker_count() {
  if (const char* env = std::getenv("SFRECON_WORKERS")) {
    const int parsed = std::atoi(env);
    if (parsed >= 1) return parsed;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(std::size_t n, int workers,
                     const std::function<void(std::size_t, std::size_t, int)>& fn) {
  if (n == 0) return;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t base = n / workers;
  const std::size_t extra = n % workers;
  std::size_t begin = 0;
  for (int w = 0; w < workers; ++w) {
    const std::size_t len = base + (static_cast<std::size_t>(w) < extra ? 1 : 0);
    const std::size_t end = begin + len;
    threads.emplace_back([=, &fn] { fn(begin, end, w); });
    begin = end;
  }
  for (auto& t : threads) t.join();
}

}  // namespace sfr
