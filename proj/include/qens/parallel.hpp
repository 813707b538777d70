#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qens {

/// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) carry += (sum - t) + x;
    else carry += (x - t) + sum;
    sum = t;
  }
  void merge(const CompensatedSum& other) {
    add(other.sum);
    add(other.carry);
  }
  double value() const { return sum + carry; }
};

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Evaluates `work(chunk)` for every chunk in [0, n_chunks) on up to `threads`
/// workers and returns the results indexed by chunk. Callers reduce the vector
/// in index order, so the result never depends on the thread count.
template <class Result, class Work>
std::vector<Result> run_chunks(std::uint64_t n_chunks, int threads, Work&& work) {
  std::vector<Result> results(n_chunks);
  const int workers = static_cast<int>(
      std::min<std::uint64_t>(static_cast<std::uint64_t>(resolve_threads(threads)), n_chunks));
  if (workers <= 1) {
    for (std::uint64_t c = 0; c < n_chunks; ++c) results[c] = work(c);
    return results;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::uint64_t c = next.fetch_add(1);
        if (c >= n_chunks) return;
        try {
          results[c] = work(c);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(n_chunks);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace qens
