#pragma once

// Scalar special functions (log-gamma, digamma, trigamma) and the finite sums
// over j = 0..y-1 that stand in for differences of them.
//
// All three special functions use the same scheme: shift the argument upward
// with the exact recurrence until it exceeds kAsymptoticThreshold, then apply
// the asymptotic (Stirling / Bernoulli) expansion truncated at x^-15, whose
// first omitted term is below 1e-17 at the threshold.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <string>

#include "errors.hpp"

namespace nbreg {

using Count = std::int64_t;

namespace detail {

template <std::floating_point T>
constexpr T kAsymptoticThreshold = T(10);

// Finite sums switch to the special-function difference above this count.
inline constexpr Count kDirectSumLimit = 1'000'000;

template <std::floating_point T>
void require_positive(T x, const char* fn) {
  if (!(x > T(0)) || !std::isfinite(x))
    throw DomainError(std::string(fn) + ": argument must be positive and finite, got " +
                      std::to_string(static_cast<double>(x)));
}

inline void require_count(Count y, const char* fn) {
  if (y < 0) throw DomainError(std::string(fn) + ": count must be non-negative, got " + std::to_string(y));
}

}  // namespace detail

template <std::floating_point T>
T ln_gamma(T x) {
  detail::require_positive(x, "ln_gamma");
  if (x == T(1) || x == T(2)) return T(0);
  T shift = T(0);
  if (x < detail::kAsymptoticThreshold<T>) {
    // ln(x (x+1) ... (x+k-1)), accumulated as a product and logged in blocks
    // to stay far from overflow/underflow.
    T prod = T(1);
    while (x < detail::kAsymptoticThreshold<T>) {
      prod *= x;
      x += T(1);
      if (prod > T(1e200) || prod < T(1e-200)) {
        shift += std::log(prod);
        prod = T(1);
      }
    }
    shift += std::log(prod);
  }
  const T inv = T(1) / x;
  const T inv2 = inv * inv;
  // B_{2k} / (2k (2k-1) x^{2k-1}), k = 1..7
  const T series =
      inv * (T(1) / 12 +
             inv2 * (T(-1) / 360 +
                     inv2 * (T(1) / 1260 +
                             inv2 * (T(-1) / 1680 +
                                     inv2 * (T(1) / 1188 + inv2 * (T(-691) / 360360 + inv2 * (T(1) / 156)))))));
  const T half_log_two_pi = T(0.5) * std::log(T(2) * std::numbers::pi_v<T>);
  return (x - T(0.5)) * std::log(x) - x + half_log_two_pi + series - shift;
}

template <std::floating_point T>
T digamma(T x) {
  detail::require_positive(x, "digamma");
  T acc = T(0);
  while (x < detail::kAsymptoticThreshold<T>) {
    acc -= T(1) / x;
    x += T(1);
  }
  const T inv2 = T(1) / (x * x);
  const T series =
      inv2 * (T(1) / 12 -
              inv2 * (T(1) / 120 -
                      inv2 * (T(1) / 252 -
                              inv2 * (T(1) / 240 -
                                      inv2 * (T(1) / 132 - inv2 * (T(691) / 32760 - inv2 * (T(1) / 12)))))));
  return acc + std::log(x) - T(0.5) / x - series;
}

template <std::floating_point T>
T trigamma(T x) {
  detail::require_positive(x, "trigamma");
  T acc = T(0);
  while (x < detail::kAsymptoticThreshold<T>) {
    acc += T(1) / (x * x);
    x += T(1);
  }
  const T inv = T(1) / x;
  const T inv2 = inv * inv;
  const T series =
      inv * (T(1) + inv * (T(0.5) + inv * (T(1) / 6 -
                                           inv2 * (T(1) / 30 -
                                                   inv2 * (T(1) / 42 -
                                                           inv2 * (T(1) / 30 -
                                                                   inv2 * (T(5) / 66 -
                                                                           inv2 * (T(691) / 2730 -
                                                                                   inv2 * (T(7) / 6)))))))));
  return acc + series;
}

/// sum_{j=0}^{y-1} ln(j + a), i.e. ln[Gamma(y + a) / Gamma(a)].
template <std::floating_point T>
T sum_log_shifted(Count y, T a) {
  detail::require_count(y, "sum_log_shifted");
  detail::require_positive(a, "sum_log_shifted");
  if (y > detail::kDirectSumLimit) return ln_gamma(static_cast<T>(y) + a) - ln_gamma(a);
  T s = T(0);
  for (Count j = 0; j < y; ++j) s += std::log(static_cast<T>(j) + a);
  return s;
}

/// sum_{j=0}^{y-1} 1 / (j + 1/theta).
template <std::floating_point T>
T sum_recip_shifted(Count y, T theta) {
  detail::require_count(y, "sum_recip_shifted");
  detail::require_positive(theta, "sum_recip_shifted");
  const T a = T(1) / theta;
  if (y > detail::kDirectSumLimit) return digamma(static_cast<T>(y) + a) - digamma(a);
  T s = T(0);
  for (Count j = 0; j < y; ++j) s += T(1) / (static_cast<T>(j) + a);
  return s;
}

/// sum_{j=0}^{y-1} 1 / (j + a)^2.
template <std::floating_point T>
T sum_recip_sq_shifted(Count y, T a) {
  detail::require_count(y, "sum_recip_sq_shifted");
  detail::require_positive(a, "sum_recip_sq_shifted");
  if (y > detail::kDirectSumLimit) return trigamma(a) - trigamma(static_cast<T>(y) + a);
  T s = T(0);
  for (Count j = 0; j < y; ++j) {
    const T d = static_cast<T>(j) + a;
    s += T(1) / (d * d);
  }
  return s;
}

/// sum_{j=0}^{y-1} (2j + 1/theta) / (j + 1/theta)^2, the second theta-derivative
/// kernel of the gamma-free log-likelihood (up to the theta^-3 factor).
template <std::floating_point T>
T sum_trigamma_weights(Count y, T theta) {
  detail::require_count(y, "sum_trigamma_weights");
  detail::require_positive(theta, "sum_trigamma_weights");
  const T a = T(1) / theta;
  if (y > detail::kDirectSumLimit) return T(2) * sum_recip_shifted(y, theta) - a * sum_recip_sq_shifted(y, a);
  T s = T(0);
  for (Count j = 0; j < y; ++j) {
    const T d = static_cast<T>(j) + a;
    s += (T(2) * static_cast<T>(j) + a) / (d * d);
  }
  return s;
}

/// Single weight w_j = (2j + 1/theta) / (j + 1/theta)^2.
template <std::floating_point T>
T trigamma_weight(Count j, T theta) {
  const T a = T(1) / theta;
  const T d = static_cast<T>(j) + a;
  return (T(2) * static_cast<T>(j) + a) / (d * d);
}

}  // namespace nbreg
