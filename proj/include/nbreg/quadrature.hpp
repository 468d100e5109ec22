#pragma once

// One-dimensional quadrature on finite intervals: globally adaptive
// Gauss-Kronrod (21 points, QUADPACK QAG style bisection of the interval with
// the largest error estimate) or a fixed composite Gauss-Kronrod rule.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "errors.hpp"

namespace nbreg {

enum class QuadratureScheme { ADAPTIVE_INTERVAL, FIXED_NODES };

struct QuadratureSpec {
  QuadratureScheme scheme = QuadratureScheme::ADAPTIVE_INTERVAL;
  double rel_tol = 1e-11;
  double abs_tol = 1e-15;
  std::size_t max_subdivisions = 2000;  // panel count for FIXED_NODES
};

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t subdivisions = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

// Gauss-Kronrod 10/21 abscissae and weights (QUADPACK dqk21).
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <typename F>
Panel gauss_kronrod21(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double res_g = 0.0;
  double res_k = kWgk[10] * fc;
  double res_abs = std::abs(res_k);
  std::array<double, 10> fv1{}, fv2{};
  for (std::size_t j = 0; j < 5; ++j) {
    const std::size_t jtw = 2 * j + 1;
    const double dx = half * kXgk[jtw];
    const double f1 = f(center - dx), f2 = f(center + dx);
    fv1[jtw] = f1;
    fv2[jtw] = f2;
    res_g += kWg[j] * (f1 + f2);
    res_k += kWgk[jtw] * (f1 + f2);
    res_abs += kWgk[jtw] * (std::abs(f1) + std::abs(f2));
  }
  for (std::size_t j = 0; j < 5; ++j) {
    const std::size_t jtwm1 = 2 * j;
    const double dx = half * kXgk[jtwm1];
    const double f1 = f(center - dx), f2 = f(center + dx);
    fv1[jtwm1] = f1;
    fv2[jtwm1] = f2;
    res_k += kWgk[jtwm1] * (f1 + f2);
    res_abs += kWgk[jtwm1] * (std::abs(f1) + std::abs(f2));
  }
  const double mean = 0.5 * res_k;
  double res_asc = kWgk[10] * std::abs(fc - mean);
  for (std::size_t j = 0; j < 10; ++j) res_asc += kWgk[j] * (std::abs(fv1[j] - mean) + std::abs(fv2[j] - mean));

  const double value = res_k * half;
  res_abs *= std::abs(half);
  res_asc *= std::abs(half);
  double err = std::abs((res_k - res_g) * half);
  if (res_asc != 0.0 && err != 0.0) err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (res_abs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * res_abs, err);
  return {a, b, value, err};
}

}  // namespace detail

/// Integrates f over [a, b]. Never throws on non-convergence; check
/// `converged` (see integrate_or_throw).
template <typename F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureSpec& spec = {}) {
  if (!(spec.rel_tol > 0.0)) throw DomainError("integrate: rel_tol must be positive");
  if (!(b > a)) throw DomainError("integrate: need a < b");
  QuadratureResult out;
  if (spec.scheme == QuadratureScheme::FIXED_NODES) {
    const std::size_t panels = std::max<std::size_t>(1, spec.max_subdivisions);
    const double width = (b - a) / static_cast<double>(panels);
    for (std::size_t k = 0; k < panels; ++k) {
      const double lo = a + width * static_cast<double>(k);
      const double hi = k + 1 == panels ? b : lo + width;
      const auto p = detail::gauss_kronrod21(f, lo, hi);
      out.value += p.value;
      out.abs_error += p.error;
    }
    out.subdivisions = panels;
    out.evaluations = 21 * panels;
    out.converged = out.abs_error <= std::max(spec.abs_tol, spec.rel_tol * std::abs(out.value));
    return out;
  }

  std::priority_queue<detail::Panel> heap;
  auto first = detail::gauss_kronrod21(f, a, b);
  double total = first.value;
  double total_err = first.error;
  heap.push(first);
  out.evaluations = 21;
  std::size_t splits = 0;
  while (total_err > std::max(spec.abs_tol, spec.rel_tol * std::abs(total)) && splits < spec.max_subdivisions) {
    const detail::Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // interval too small to split
    heap.pop();
    const auto left = detail::gauss_kronrod21(f, worst.a, mid);
    const auto right = detail::gauss_kronrod21(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    out.evaluations += 42;
    ++splits;
  }
  // Re-sum from the panels to drop accumulated update rounding.
  total = 0.0;
  total_err = 0.0;
  std::vector<detail::Panel> panels;
  panels.reserve(heap.size());
  while (!heap.empty()) {
    panels.push_back(heap.top());
    heap.pop();
  }
  std::sort(panels.begin(), panels.end(), [](const auto& l, const auto& r) { return l.a < r.a; });
  for (const auto& p : panels) {
    total += p.value;
    total_err += p.error;
  }
  out.value = total;
  out.abs_error = total_err;
  out.subdivisions = splits;
  out.converged = total_err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
  return out;
}

template <typename F>
double integrate_or_throw(F&& f, double a, double b, const QuadratureSpec& spec, const char* what) {
  const auto r = integrate(f, a, b, spec);
  if (!r.converged)
    throw QuadratureError(std::string(what) + ": quadrature did not converge, estimated error " +
                              std::to_string(r.abs_error),
                          r.abs_error);
  return r.value;
}

}  // namespace nbreg
