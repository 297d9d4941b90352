#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sgrl {

/// Runs fn(i) for i in [begin, end) on up to `workers` threads. Work items
/// must write only to their own slot; the first exception is rethrown.
template <typename Fn>
void parallel_for(long begin, long end, int workers, Fn&& fn) {
  if (end <= begin) return;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(end - begin)));
  if (workers == 1) {
    for (long i = begin; i < end; ++i) fn(i);
    return;
  }
  std::atomic<long> next{begin};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (long i = next++; i < end; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sgrl
