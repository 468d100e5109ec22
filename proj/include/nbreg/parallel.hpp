#pragma once

// Per-observation reductions. Terms are computed (possibly on several
// threads) into a buffer and then combined by pairwise summation in a fixed
// order, so results do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace nbreg {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> n{1};
  return n;
}
}  // namespace detail

inline void set_num_threads(unsigned n) { detail::thread_setting() = std::max(1u, n); }
inline unsigned num_threads() { return detail::thread_setting().load(); }

inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Calls fn(i) for i in [0, n), splitting the range across threads when n is
/// large enough to be worth it.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  constexpr std::size_t kMinPerThread = 2048;
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(num_threads(), std::max<std::size_t>(1, n / kMinPerThread)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([lo, hi, &fn, &err = errors[t]] {
        try {
          for (std::size_t i = lo; i < hi; ++i) fn(i);
        } catch (...) {
          err = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Deterministic sum of term(i) over i in [0, n).
template <typename Fn>
double reduce_terms(std::size_t n, Fn&& term) {
  std::vector<double> buf(n);
  parallel_for(n, [&](std::size_t i) { buf[i] = term(i); });
  return pairwise_sum(buf);
}

}  // namespace nbreg
