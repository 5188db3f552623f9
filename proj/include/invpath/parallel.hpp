#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace invpath {

// Static block split of [0, count) across hardware threads. Falls back to a
// plain loop on single-core hosts or tiny ranges; the worker must be safe to
// call concurrently for distinct indices.
inline void parallel_for(int count, const std::function<void(int)>& body, int grain = 16) {
  if (count <= 0) return;
  const unsigned hw = std::thread::hardware_concurrency();
  const int threads = static_cast<int>(std::min<unsigned>(hw == 0 ? 1 : hw,
                                                          static_cast<unsigned>((count + grain - 1) / grain)));
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int start = next.fetch_add(grain);
      if (start >= count) return;
      const int stop = std::min(count, start + grain);
      try {
        for (int i = start; i < stop; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace invpath
