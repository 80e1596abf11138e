#ifndef FPT_PARALLEL_HPP
#define FPT_PARALLEL_HPP

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace fpt {

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend only on
/// (n, threads), and every index is written by exactly one chunk, so results do not depend on
/// scheduling. The first exception thrown by a chunk is rethrown on the caller.
template <typename Body>
void parallel_for(int n, int threads, Body&& body) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  pool.reserve(threads);
  for (int c = 0; c < threads; ++c) {
    const int begin = static_cast<int>(static_cast<long long>(n) * c / threads);
    const int end = static_cast<int>(static_cast<long long>(n) * (c + 1) / threads);
    pool.emplace_back([&, c, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Thread count from an explicit request, else FPT_THREADS, else 1.
int resolve_threads(int requested);

}  // namespace fpt

#endif  // FPT_PARALLEL_HPP
