#pragma once

// Observed and expected information for (beta, theta), parameters ordered
// beta_0 .. beta_{p-1}, theta.
//
// The expected theta-theta element needs
//   E[ sum_{j<y} w_j ] = sum_j w_j Pr(Y > j),   w_j = (2j + 1/theta) / (j + 1/theta)^2,
// an infinite series. Both tail-index readings (Pr(Y >= j) and Pr(Y >= j+1))
// are evaluated next to the direct double sum sum_y pmf(y) sum_{j<y} w_j, and
// the reading that reproduces the double sum is the one used.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "derivatives.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "special.hpp"

namespace nbreg {

enum class InfoKind { OBSERVED, EXPECTED };

enum class TailConvention {
  GE_J,        // Pr(Y >= j)
  GE_J_PLUS_1  // Pr(Y >= j + 1)
};

inline const char* to_string(InfoKind k) { return k == InfoKind::OBSERVED ? "observed" : "expected"; }
inline const char* to_string(TailConvention c) {
  return c == TailConvention::GE_J ? "Pr(Y>=j)" : "Pr(Y>=j+1)";
}

/// theta^-3 sum_j w_j T(j) under each tail reading, plus the direct double sum.
struct ExpectedTrigammaTail {
  double s_ge_j = 0.0;         // tails Pr(Y >= j)
  double s_ge_j_plus_1 = 0.0;  // tails Pr(Y >= j+1)
  double direct = 0.0;         // theta^-3 sum_y pmf(y) sum_{j<y} w_j
  TruncationInfo truncation;

  double residual(TailConvention c) const {
    const double s = c == TailConvention::GE_J ? s_ge_j : s_ge_j_plus_1;
    return std::abs(s - direct) / std::max(1.0, std::abs(direct));
  }
  TailConvention matching() const {
    return residual(TailConvention::GE_J_PLUS_1) <= residual(TailConvention::GE_J) ? TailConvention::GE_J_PLUS_1
                                                                                    : TailConvention::GE_J;
  }
  double value(TailConvention c) const { return c == TailConvention::GE_J ? s_ge_j : s_ge_j_plus_1; }
};

inline ExpectedTrigammaTail expected_trigamma_tail(double lambda, double theta, double eps_tail = kDefaultEpsTail) {
  detail::check_pmf_args(0, lambda, 1.0 / theta, "expected_trigamma_tail");
  const double t3 = theta * theta * theta;
  ExpectedTrigammaTail out;

  // Direct double sum; also fixes the cutoff J.
  double cumulative_w = 0.0;  // W(y) = sum_{j<y} w_j
  Count next = 0;
  out.direct = pmf_weighted_sum(
      lambda, theta, eps_tail,
      [&](Count y) {
        while (next < y) cumulative_w += trigamma_weight(next++, theta);
        return cumulative_w / t3;
      },
      &out.truncation);

  const Count cutoff = out.truncation.cutoff;
  std::vector<double> pmf(static_cast<std::size_t>(cutoff) + 1);
  PmfStream stream(lambda, theta);
  for (Count k = 0; k <= cutoff; ++k) {
    pmf[static_cast<std::size_t>(k)] = stream.pmf();
    if (k < cutoff) stream.advance();
  }
  // Tails accumulated from the top so small tail values keep their precision.
  double tail_above = stream.upper_tail();  // Pr(Y > cutoff)
  double s_ge_j = 0.0, s_ge_j1 = 0.0;
  for (Count j = cutoff; j >= 0; --j) {
    const double w = trigamma_weight(j, theta);
    const double ge_j1 = tail_above;
    const double ge_j = tail_above + pmf[static_cast<std::size_t>(j)];
    s_ge_j1 += w * ge_j1;
    s_ge_j += w * ge_j;
    tail_above = ge_j;
  }
  out.s_ge_j = s_ge_j / t3;
  out.s_ge_j_plus_1 = s_ge_j1 / t3;
  return out;
}

/// Per-observation record of how the infinite series was cut.
struct TruncationEntry {
  std::size_t observation = 0;
  Count cutoff = 0;
  double tail_mass = 0.0;
  double residual_bound = 0.0;
  double s_ge_j = 0.0;
  double s_ge_j_plus_1 = 0.0;
  double direct = 0.0;
};

struct InfoMatrix {
  InfoKind kind = InfoKind::OBSERVED;
  Eigen::MatrixXd m;
  std::vector<TruncationEntry> truncation;   // EXPECTED only
  std::optional<TailConvention> convention;  // EXPECTED only
};

struct ExpectedThetaInfo {
  double value = 0.0;                   // with the convention that matches the double sum
  double value_ge_j = 0.0;              // raw, Pr(Y >= j) reading
  double value_ge_j_plus_1 = 0.0;       // raw, Pr(Y >= j+1) reading
  TailConvention convention = TailConvention::GE_J_PLUS_1;
  std::vector<TruncationEntry> truncation;
};

/// E[-d^2 lnL / d theta^2].
inline ExpectedThetaInfo expected_info_theta(const Dataset& ds, const Params& p, double eps_tail = kDefaultEpsTail) {
  if (!(eps_tail > 0.0)) throw DomainError("expected_info_theta: eps_tail must be positive");
  const LinkValues link = link_mean(ds, p);
  const double theta = p.theta();
  const double t3 = theta * theta * theta;
  const std::size_t n = ds.n();
  std::vector<ExpectedTrigammaTail> tails(n);
  std::vector<double> closed(n);
  parallel_for(n, [&](std::size_t i) {
    const double lambda = link.lambda(static_cast<Eigen::Index>(i));
    tails[i] = expected_trigamma_tail(lambda, theta, eps_tail);
    closed[i] = (2.0 * std::log1p(theta * lambda) - theta * lambda / (1.0 + theta * lambda)) / t3;
  });

  double worst_a = 0.0, worst_b = 0.0;
  for (const auto& t : tails) {
    worst_a = std::max(worst_a, t.residual(TailConvention::GE_J));
    worst_b = std::max(worst_b, t.residual(TailConvention::GE_J_PLUS_1));
  }
  ExpectedThetaInfo out;
  out.convention = worst_b <= worst_a ? TailConvention::GE_J_PLUS_1 : TailConvention::GE_J;
  std::vector<double> va(n), vb(n);
  out.truncation.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = closed[i] - tails[i].s_ge_j;
    vb[i] = closed[i] - tails[i].s_ge_j_plus_1;
    out.truncation.push_back({i, tails[i].truncation.cutoff, tails[i].truncation.tail_mass,
                              tails[i].truncation.residual_bound, tails[i].s_ge_j, tails[i].s_ge_j_plus_1,
                              tails[i].direct});
  }
  out.value_ge_j = pairwise_sum(va);
  out.value_ge_j_plus_1 = pairwise_sum(vb);
  out.value = out.convention == TailConvention::GE_J ? out.value_ge_j : out.value_ge_j_plus_1;
  return out;
}

/// Reference value for one observation: sum_y pmf(y) * (-h_tt(y)).
inline double brute_force_expected_neg_hessian(double lambda, double theta, double eps_tail = kDefaultEpsTail,
                                               TruncationInfo* info = nullptr) {
  detail::check_pmf_args(0, lambda, 1.0 / theta, "brute_force_expected_neg_hessian");
  return pmf_weighted_sum(
      lambda, theta, eps_tail, [&](Count y) { return -obs::hessian_theta(y, lambda, theta); }, info);
}

/// E[-d^2 lnL / d beta d beta'] = sum_i lambda_i / (1 + theta lambda_i) x_i x_i'.
inline Eigen::MatrixXd expected_info_beta(const Dataset& ds, const Params& p) {
  return detail::weighted_gram(ds, link_mean(ds, p), p.theta(), [](Count, double lambda, double theta) {
    return lambda / (1.0 + theta * lambda);
  });
}

struct CrossInfo {
  Eigen::VectorXd analytic;     // identically zero since E[y] = lambda
  Eigen::VectorXd brute_force;  // sum_i x_i sum_y pmf(y) (-h_bt weight)
};

inline CrossInfo expected_info_cross(const Dataset& ds, const Params& p, double eps_tail = kDefaultEpsTail) {
  const LinkValues link = link_mean(ds, p);
  CrossInfo out;
  out.analytic = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.p()));
  out.brute_force = detail::weighted_column_sum(ds, link, p.theta(), [&](Count, double lambda, double theta) {
    return pmf_weighted_sum(lambda, theta, eps_tail,
                            [&](Count y) { return -obs::hessian_cross_weight(y, lambda, theta); });
  });
  return out;
}

namespace detail {
inline Eigen::MatrixXd assemble_info(const Eigen::MatrixXd& bb, const Eigen::VectorXd& bt, double tt) {
  const Eigen::Index p = bb.rows();
  Eigen::MatrixXd m(p + 1, p + 1);
  m.topLeftCorner(p, p) = bb;
  m.topRightCorner(p, 1) = bt;
  m.bottomLeftCorner(1, p) = bt.transpose();
  m(p, p) = tt;
  return m;
}
}  // namespace detail

/// Negative analytic Hessian.
inline InfoMatrix observed_info(const Dataset& ds, const Params& p) {
  const GradHess g = grad_hess(ds, p);
  InfoMatrix info;
  info.kind = InfoKind::OBSERVED;
  info.m = detail::assemble_info(-g.h_bb, -g.h_bt, -g.h_tt);
  return info;
}

inline InfoMatrix expected_info(const Dataset& ds, const Params& p, double eps_tail = kDefaultEpsTail) {
  ExpectedThetaInfo tt = expected_info_theta(ds, p, eps_tail);
  InfoMatrix info;
  info.kind = InfoKind::EXPECTED;
  info.m = detail::assemble_info(expected_info_beta(ds, p), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.p())),
                                 tt.value);
  info.truncation = std::move(tt.truncation);
  info.convention = tt.convention;
  return info;
}

inline InfoMatrix information(const Dataset& ds, const Params& p, InfoKind kind, double eps_tail = kDefaultEpsTail) {
  return kind == InfoKind::OBSERVED ? observed_info(ds, p) : expected_info(ds, p, eps_tail);
}

}  // namespace nbreg
