#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gwmodel {

namespace detail {
inline std::atomic<unsigned>& thread_setting()
{
  static std::atomic<unsigned> value{0};
  return value;
}
} // namespace detail

/// Number of worker threads used for per-location loops. 0 means "all cores".
inline void set_num_threads(unsigned n) { detail::thread_setting().store(n); }

inline unsigned num_threads()
{
  unsigned n = detail::thread_setting().load();
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
  }
  return n;
}

/// Runs fn(i) for i in [0, count). Each index is visited exactly once; callers
/// write results into per-index slots, so the output does not depend on the
/// thread count. If several indices throw, the exception from the lowest index
/// is rethrown.
template <typename Fn>
void parallel_for(std::ptrdiff_t count, Fn&& fn)
{
  if (count <= 0) {
    return;
  }
  const auto workers = static_cast<std::ptrdiff_t>(std::min<std::ptrdiff_t>(num_threads(), count));
  if (workers <= 1) {
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }

  std::atomic<std::ptrdiff_t> next{0};
  std::mutex error_mutex;
  std::ptrdiff_t error_index = count;
  std::exception_ptr error;

  auto worker = [&]() {
    for (;;) {
      const std::ptrdiff_t i = next.fetch_add(1);
      if (i >= count) {
        return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (std::ptrdiff_t t = 1; t < workers; ++t) {
    pool.emplace_back(worker);
  }
  worker();
  pool.clear();

  if (error) {
    std::rethrow_exception(error);
  }
}

} // namespace gwmodel
