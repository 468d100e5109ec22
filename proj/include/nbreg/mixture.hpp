#pragma once

// Poisson-Gamma mixture: y | u ~ Poisson(lambda u), u ~ Gamma(shape alpha,
// rate alpha) with unit mean. The marginal of y is NB2(lambda, alpha).

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "quadrature.hpp"
#include "special.hpp"

namespace nbreg {

/// Unit-mean Gamma density alpha^alpha / Gamma(alpha) u^(alpha-1) e^(-alpha u).
inline double gamma_density(double u, double alpha) {
  detail::require_positive(u, "gamma_density");
  detail::require_positive(alpha, "gamma_density");
  return std::exp(alpha * std::log(alpha) - ln_gamma(alpha) + (alpha - 1.0) * std::log(u) - alpha * u);
}

inline double poisson_pmf(Count y, double lam) {
  detail::require_count(y, "poisson_pmf");
  detail::require_positive(lam, "poisson_pmf");
  const double yd = static_cast<double>(y);
  return std::exp((y == 0 ? 0.0 : yd * std::log(lam)) - lam - ln_gamma(yd + 1.0));
}

namespace detail {

// Integral over (0, inf) of exp(log_scale + (s-1) ln x - x). Below x = 1 the
// substitution x = t^(1/s) removes the x^(s-1) singularity when s < 1; the
// upper limit leaves a tail below e^-40 relative to the bulk.
inline QuadratureResult integrate_power_exponential(double log_scale, double s, const QuadratureSpec& spec) {
  auto bulk = [&](double x) { return x <= 0.0 ? 0.0 : std::exp(log_scale + (s - 1.0) * std::log(x) - x); };
  const double upper = std::max(1.0, s - 1.0) + 40.0 + 12.0 * std::sqrt(std::max(1.0, s));
  if (s >= 1.0) return integrate(bulk, 0.0, upper, spec);
  auto near_zero = [&](double t) {
    if (t <= 0.0) return std::exp(log_scale) / s;
    return std::exp(log_scale - std::pow(t, 1.0 / s)) / s;
  };
  auto lo = integrate(near_zero, 0.0, 1.0, spec);
  const auto hi = integrate(bulk, 1.0, upper, spec);
  lo.value += hi.value;
  lo.abs_error += hi.abs_error;
  lo.subdivisions += hi.subdivisions;
  lo.evaluations += hi.evaluations;
  lo.converged = lo.converged && hi.converged;
  return lo;
}

}  // namespace detail

/// Pr(Y = y) as the integral of poisson_pmf(y, lambda u) gamma_density(u, alpha)
/// over u, evaluated by quadrature after the change of variable
/// x = u (lambda + alpha).
inline double mixture_pmf(Count y, double lambda, double alpha, const QuadratureSpec& q = {}) {
  detail::check_pmf_args(y, lambda, alpha, "mixture_pmf");
  const double yd = static_cast<double>(y);
  const double s = yd + alpha;
  const double log_scale = (y == 0 ? 0.0 : yd * std::log(lambda)) + alpha * std::log(alpha) -
                           ln_gamma(yd + 1.0) - ln_gamma(alpha) - s * std::log(lambda + alpha);
  const auto r = detail::integrate_power_exponential(log_scale, s, q);
  if (!r.converged)
    throw QuadratureError("mixture_pmf: quadrature did not converge, estimated error " + std::to_string(r.abs_error),
                          r.abs_error);
  return r.value;
}

/// sum_y y pmf(y), truncated by the tail rule.
inline double nb_mean_bruteforce(double lambda, double alpha, double eps_tail = kDefaultEpsTail) {
  detail::check_pmf_args(0, lambda, alpha, "nb_mean_bruteforce");
  return pmf_weighted_sum(lambda, 1.0 / alpha, eps_tail, [](Count y) { return static_cast<double>(y); });
}

/// sum_y y^2 pmf(y) - mean^2, truncated by the tail rule.
inline double nb_variance_bruteforce(double lambda, double alpha, double eps_tail = kDefaultEpsTail) {
  detail::check_pmf_args(0, lambda, alpha, "nb_variance_bruteforce");
  const double theta = 1.0 / alpha;
  const double m1 = pmf_weighted_sum(lambda, theta, eps_tail, [](Count y) { return static_cast<double>(y); });
  const double m2 = pmf_weighted_sum(lambda, theta, eps_tail, [](Count y) {
    const double yd = static_cast<double>(y);
    return yd * yd;
  });
  return m2 - m1 * m1;
}

// Sampling ------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seeded generator with a fixed, documented stream layout.
///
/// Stream k of seed s is std::mt19937_64 seeded with
/// splitmix64(s ^ splitmix64(k)). Uniforms take the top 53 bits of each
/// 64-bit draw; normals use the Marsaglia polar method; Gamma variates use
/// Marsaglia-Tsang (with the U^(1/a) boost for shape < 1); Poisson variates
/// use multiplication inversion for means below 12 and Hoermann's PTRS above.
/// None of this goes through the implementation-defined std:: distributions,
/// so a seed produces the same numbers with every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(splitmix64(seed ^ splitmix64(stream))) {}

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  /// Gamma(shape, scale 1).
  double gamma(double shape) {
    if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  Count poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 12.0) {
      const double limit = std::exp(-mean);
      Count k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    const double smu = std::sqrt(mean);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<Count>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          -mean + kf * log_mean - ln_gamma(kf + 1.0))
        return static_cast<Count>(kf);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// One NB2 draw by composition: u ~ Gamma(alpha, rate alpha), y ~ Poisson(lambda u).
inline Count draw_nb(Rng& rng, double lambda, double theta) {
  const double alpha = 1.0 / theta;
  const double u = rng.gamma(alpha) / alpha;
  return rng.poisson(lambda * u);
}

/// n iid NB2(lambda, 1/theta) draws from stream 0 of `seed`.
inline std::vector<Count> sample_nb(double lambda, double theta, std::uint64_t seed, std::size_t n) {
  detail::require_positive(lambda, "sample_nb");
  detail::require_positive(theta, "sample_nb");
  if (n == 0) throw DomainError("sample_nb: n must be at least 1");
  Rng rng(seed, 0);
  std::vector<Count> out(n);
  for (auto& y : out) y = draw_nb(rng, lambda, theta);
  return out;
}

/// One draw per mean in `lambdas`, in order, from stream 0 of `seed`.
inline std::vector<Count> sample_nb(std::span<const double> lambdas, double theta, std::uint64_t seed) {
  detail::require_positive(theta, "sample_nb");
  Rng rng(seed, 0);
  std::vector<Count> out(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    detail::require_positive(lambdas[i], "sample_nb");
    out[i] = draw_nb(rng, lambdas[i], theta);
  }
  return out;
}

}  // namespace nbreg
