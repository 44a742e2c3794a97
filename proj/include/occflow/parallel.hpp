#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace occflow {

/// Runs independent tasks on a fixed number of threads. Task decomposition
/// never depends on the thread count, so results written per task index are
/// identical for any worker count.
class Workers {
 public:
  explicit Workers(int threads = 0)
      : threads_(threads > 0 ? threads
                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))) {}

  int size() const { return threads_; }

  template <class F>
  void run(std::size_t n_tasks, F&& fn) const {
    if (n_tasks == 0) return;
    const int n = static_cast<int>(std::min<std::size_t>(threads_, n_tasks));
    if (n <= 1) {
      for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto body = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next.store(n_tasks);
        }
      }
    };
    std::vector<std::jthread> pool;
    pool.reserve(n - 1);
    for (int t = 1; t < n; ++t) pool.emplace_back(body);
    body();
    pool.clear();
    if (error) std::rethrow_exception(error);
  }

 private:
  int threads_;
};

/// Pairwise (tree) sum with a fixed association order.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace occflow
