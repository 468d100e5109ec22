#pragma once

// Numerical adjudication of the digamma/trigamma identities that connect the
// gamma-function and gamma-free forms of the NB2 likelihood derivatives.
//
// Each check evaluates every member of a chained equality at each grid point
// and reports all pairwise |differences|. Nothing is assumed to hold: every
// pair carries an expectation (HOLDS or FAILS) and the verdict records what
// was measured. For the chain identities the reference value is a finite
// difference of ln[Gamma(y + 1/theta) / Gamma(1/theta)] computed through
// ln_gamma, so it does not depend on the identities being tested.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "derivatives.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "special.hpp"

namespace nbreg {

enum class IdentityId {
  DIGAMMA_SUM,     // Psi(y+a) - Psi(a) = sum 1/(j+a)
  DIGAMMA_CHAIN,   // d/dtheta ln-ratio = Psi difference = -theta^-2 sum 1/(j+1/theta)
  TRIGAMMA_CHAIN,  // d2/dtheta2 ln-ratio = Psi' difference = theta^-3 sum w_j
  TRIGAMMA_SUM     // Psi'(y+a) - Psi'(a) = -sum 1/(j+a)^2 and its theta rewrites
};

inline const char* to_string(IdentityId id) {
  switch (id) {
    case IdentityId::DIGAMMA_SUM: return "digamma_sum";
    case IdentityId::DIGAMMA_CHAIN: return "digamma_chain";
    case IdentityId::TRIGAMMA_CHAIN: return "trigamma_chain";
    case IdentityId::TRIGAMMA_SUM: return "trigamma_sum";
  }
  return "unknown";
}

enum class Expectation { HOLDS, FAILS };

struct GridPoint {
  Count y = 0;
  double param = 1.0;  // alpha for the *_SUM checks, theta for the *_CHAIN checks
};

struct Labeled {
  std::string label;
  double value = 0.0;
};

struct PointResult {
  GridPoint point;
  bool valid = true;
  std::string error;
  std::vector<Labeled> values;
  std::vector<Labeled> residuals;  // |difference| per pair, same order as verdicts
};

struct PairVerdict {
  std::string pair;
  Expectation expected = Expectation::HOLDS;
  double tol = 0.0;
  double max_residual = 0.0;
  bool holds = true;  // max_residual <= tol
  bool as_expected() const { return holds == (expected == Expectation::HOLDS); }
};

struct IdentityReport {
  IdentityId id = IdentityId::DIGAMMA_SUM;
  std::string parameter;  // "alpha" or "theta"
  std::vector<PointResult> points;
  std::vector<PairVerdict> verdicts;

  /// True when every pair expected to hold does.
  bool expected_pairs_hold() const {
    for (const auto& v : verdicts)
      if (v.expected == Expectation::HOLDS && !v.holds) return false;
    return true;
  }
  const PairVerdict& verdict(const std::string& pair) const {
    for (const auto& v : verdicts)
      if (v.pair == pair) return v;
    throw DomainError("IdentityReport: no pair '" + pair + "'");
  }
};

struct IdentityTolerances {
  double sum = 1e-9;       // digamma/trigamma difference vs finite sum
  double first = 1e-6;     // first finite-difference derivative
  double second = 1e-4;    // second finite-difference derivative
  double algebra = 1e-12;  // pure rewrites of the same sum
};

/// y in {0,1,2,5,10,50} x param in {0.1,0.5,1,2,10}.
inline std::vector<GridPoint> default_identity_grid() {
  std::vector<GridPoint> g;
  for (Count y : {0, 1, 2, 5, 10, 50})
    for (double v : {0.1, 0.5, 1.0, 2.0, 10.0}) g.push_back({y, v});
  return g;
}

// ln[Gamma(y + 1/theta) / Gamma(1/theta)] through ln_gamma.
inline double log_gamma_ratio_theta(Count y, double theta) {
  const double a = 1.0 / theta;
  return ln_gamma(static_cast<double>(y) + a) - ln_gamma(a);
}

// Relative steps for the chain checks: fourth-order stencils keep truncation
// error well under the default tolerances across the grid.
inline constexpr double kChainStepFirst = 1e-3;
inline constexpr double kChainStepSecond = 1e-2;

namespace detail {

struct PairSpec {
  std::size_t lhs, rhs;
  Expectation expected;
  double tol;
};

template <typename Eval>
IdentityReport run_identity(IdentityId id, std::string parameter, const std::vector<GridPoint>& grid,
                            std::vector<std::string> member_labels, std::vector<PairSpec> pairs, Eval&& eval) {
  if (grid.empty()) throw DomainError(std::string(to_string(id)) + ": grid must be nonempty");
  IdentityReport rep;
  rep.id = id;
  rep.parameter = std::move(parameter);
  rep.points.resize(grid.size());
  for (const auto& ps : pairs) {
    PairVerdict v;
    v.pair = member_labels[ps.lhs] + "~" + member_labels[ps.rhs];
    v.expected = ps.expected;
    v.tol = ps.tol;
    rep.verdicts.push_back(std::move(v));
  }

  parallel_for(grid.size(), [&](std::size_t k) {
    PointResult& pr = rep.points[k];
    pr.point = grid[k];
    try {
      if (grid[k].y < 0) throw DomainError("count must be non-negative");
      if (!(grid[k].param > 0.0) || !std::isfinite(grid[k].param))
        throw DomainError(rep.parameter + " must be positive");
      const std::vector<double> vals = eval(grid[k].y, grid[k].param);
      for (std::size_t m = 0; m < vals.size(); ++m) pr.values.push_back({member_labels[m], vals[m]});
      for (std::size_t q = 0; q < pairs.size(); ++q)
        pr.residuals.push_back({rep.verdicts[q].pair, std::abs(vals[pairs[q].lhs] - vals[pairs[q].rhs])});
    } catch (const std::exception& e) {
      pr.valid = false;
      pr.error = e.what();
      pr.values.clear();
      pr.residuals.clear();
    }
  });

  for (const auto& pr : rep.points) {
    if (!pr.valid) continue;
    for (std::size_t q = 0; q < pairs.size(); ++q)
      rep.verdicts[q].max_residual = std::max(rep.verdicts[q].max_residual, pr.residuals[q].value);
  }
  for (auto& v : rep.verdicts) v.holds = v.max_residual <= v.tol;
  return rep;
}

}  // namespace detail

/// Psi(y + alpha) - Psi(alpha) against sum_{j<y} 1/(j + alpha).
inline IdentityReport check_digamma_sum(const std::vector<GridPoint>& grid, double tol = IdentityTolerances{}.sum) {
  return detail::run_identity(IdentityId::DIGAMMA_SUM, "alpha", grid, {"digamma_difference", "finite_sum"},
                              {{0, 1, Expectation::HOLDS, tol}}, [](Count y, double alpha) {
                                const double psi = digamma(static_cast<double>(y) + alpha) - digamma(alpha);
                                double s = 0.0;
                                for (Count j = 0; j < y; ++j) s += 1.0 / (static_cast<double>(j) + alpha);
                                return std::vector<double>{psi, s};
                              });
}

/// Members: finite-difference theta-derivative of the log gamma ratio,
/// Psi(y + 1/theta) - Psi(1/theta), and -theta^-2 sum_{j<y} 1/(j + 1/theta).
inline IdentityReport check_digamma_chain(const std::vector<GridPoint>& grid,
                                          double tol = IdentityTolerances{}.first) {
  return detail::run_identity(
      IdentityId::DIGAMMA_CHAIN, "theta", grid, {"fd_derivative", "digamma_difference", "gamma_free_sum"},
      {{0, 2, Expectation::HOLDS, tol}, {0, 1, Expectation::FAILS, tol}, {1, 2, Expectation::FAILS, tol}},
      [](Count y, double theta) {
        const double a = 1.0 / theta;
        const double fd_val =
            fd::five_point([y](double t) { return log_gamma_ratio_theta(y, t); }, theta, kChainStepFirst * theta);
        const double psi = digamma(static_cast<double>(y) + a) - digamma(a);
        const double sum = -sum_recip_shifted(y, theta) / (theta * theta);
        return std::vector<double>{fd_val, psi, sum};
      });
}

/// Members: second finite-difference theta-derivative of the log gamma
/// ratio, Psi'(y + 1/theta) - Psi'(1/theta), and theta^-3 sum_{j<y} w_j.
inline IdentityReport check_trigamma_chain(const std::vector<GridPoint>& grid,
                                           double tol = IdentityTolerances{}.second) {
  return detail::run_identity(
      IdentityId::TRIGAMMA_CHAIN, "theta", grid, {"fd_second_derivative", "trigamma_difference", "gamma_free_sum"},
      {{0, 2, Expectation::HOLDS, tol}, {0, 1, Expectation::FAILS, tol}, {1, 2, Expectation::FAILS, tol}},
      [](Count y, double theta) {
        const double a = 1.0 / theta;
        const double fd_val = fd::richardson_second([y](double t) { return log_gamma_ratio_theta(y, t); }, theta,
                                                    kChainStepSecond * theta);
        const double tri = trigamma(static_cast<double>(y) + a) - trigamma(a);
        const double sum = sum_trigamma_weights(y, theta) / (theta * theta * theta);
        return std::vector<double>{fd_val, tri, sum};
      });
}

/// Psi'(y + alpha) - Psi'(alpha) against -sum 1/(j + alpha)^2, plus the two
/// theta = 1/alpha rewrites -theta^2 sum 1/(theta j + 1)^2 and
/// -sum 1/(j + 1/theta)^2.
inline IdentityReport check_trigamma_sum(const std::vector<GridPoint>& grid, double tol = IdentityTolerances{}.sum,
                                         double algebra_tol = IdentityTolerances{}.algebra) {
  return detail::run_identity(
      IdentityId::TRIGAMMA_SUM, "alpha", grid,
      {"trigamma_difference", "finite_sum_alpha", "finite_sum_theta_scaled", "finite_sum_theta_reciprocal"},
      {{0, 1, Expectation::HOLDS, tol},
       {1, 2, Expectation::HOLDS, algebra_tol},
       {1, 3, Expectation::HOLDS, algebra_tol}},
      [](Count y, double alpha) {
        const double theta = 1.0 / alpha;
        const double tri = trigamma(static_cast<double>(y) + alpha) - trigamma(alpha);
        double by_alpha = 0.0, scaled = 0.0, recip = 0.0;
        for (Count j = 0; j < y; ++j) {
          const double jd = static_cast<double>(j);
          by_alpha += 1.0 / ((jd + alpha) * (jd + alpha));
          scaled += 1.0 / ((theta * jd + 1.0) * (theta * jd + 1.0));
          recip += 1.0 / ((jd + 1.0 / theta) * (jd + 1.0 / theta));
        }
        return std::vector<double>{tri, -by_alpha, -theta * theta * scaled, -recip};
      });
}

struct IdentitySuiteReport {
  std::vector<IdentityReport> reports;
  bool expected_pairs_hold() const {
    for (const auto& r : reports)
      if (!r.expected_pairs_hold()) return false;
    return true;
  }
};

inline IdentitySuiteReport run_identity_suite(const std::vector<GridPoint>& grid,
                                              const IdentityTolerances& tol = {}) {
  IdentitySuiteReport s;
  s.reports.push_back(check_digamma_sum(grid, tol.sum));
  s.reports.push_back(check_digamma_chain(grid, tol.first));
  s.reports.push_back(check_trigamma_chain(grid, tol.second));
  s.reports.push_back(check_trigamma_sum(grid, tol.sum, tol.algebra));
  return s;
}

}  // namespace nbreg
