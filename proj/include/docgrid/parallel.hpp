#ifndef DOCGRID_PARALLEL_HPP
#define DOCGRID_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace docgrid {

namespace detail {
inline int env_threads() {
  if (const char* s = std::getenv("DOCGRID_THREADS")) {
    const int n = std::atoi(s);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{env_threads()};
  return n;
}
}  // namespace detail

inline int num_threads() { return detail::thread_setting().load(); }
inline void set_num_threads(int n) { detail::thread_setting().store(std::max(1, n)); }

/**
 * Runs fn(i) for i in [begin, end) on up to num_threads() workers. Every
 * index is processed exactly once by exactly one worker, so kernels that
 * partition their outputs by index are bitwise independent of the thread
 * count.
 */
template <typename Fn>
void parallel_for(int begin, int end, Fn&& fn) {
  const int count = end - begin;
  if (count <= 0) return;
  const int workers = std::min(num_threads(), count);
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::atomic<int> next{begin};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    try {
      for (int i = next++; i < end; i = next++) fn(i);
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!error) error = std::current_exception();
      next = end;
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace docgrid

#endif  // DOCGRID_PARALLEL_HPP
