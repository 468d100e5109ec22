#pragma once

// The full verification program behind `nbreg verify`: identity adjudication,
// mixture and mean theorems, the expected-information tail adjudication,
// zero-mean scores and a finite-difference sweep of every analytic
// derivative. Every comparison is reported with its expectation.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "derivatives.hpp"
#include "fisher.hpp"
#include "identity.hpp"
#include "mixture.hpp"
#include "model.hpp"

namespace nbreg {

struct Check {
  std::string section;
  std::string name;
  Expectation expected = Expectation::HOLDS;
  double tol = 0.0;
  double max_residual = 0.0;
  std::size_t points = 0;
  bool holds = true;
  std::string note;

  bool as_expected() const { return holds == (expected == Expectation::HOLDS); }
};

struct VerifyOptions {
  std::vector<GridPoint> identity_grid = default_identity_grid();
  IdentityTolerances identity_tol;
  double eps_tail = kDefaultEpsTail;
  std::uint64_t seed = 20240611;
  int derivative_instances = 200;
  double derivative_tol = 1e-5;
  double mixture_tol = 1e-8;
  double mean_tol = 1e-6;
  double binomial_form_tol = 1e-12;
  double interchange_tol = 1e-9;
  double fisher_tol = 1e-6;
  double zero_score_tol = 1e-8;
};

struct VerifyReport {
  IdentitySuiteReport identities;
  std::vector<Check> checks;
  TailConvention fisher_convention = TailConvention::GE_J_PLUS_1;

  bool passed() const {
    if (!identities.expected_pairs_hold()) return false;
    for (const auto& c : checks)
      if (c.expected == Expectation::HOLDS && !c.holds) return false;
    return true;
  }
  const Check& check(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw DomainError("VerifyReport: no check '" + name + "'");
  }
};

namespace detail {

inline Check make_check(std::string section, std::string name, Expectation e, double tol, double worst,
                        std::size_t points, std::string note = {}) {
  Check c;
  c.section = std::move(section);
  c.name = std::move(name);
  c.expected = e;
  c.tol = tol;
  c.max_residual = worst;
  c.points = points;
  c.holds = worst <= tol;
  c.note = std::move(note);
  return c;
}

inline double rel_diff(double a, double b, double floor = 1.0) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace detail

// Appendix-style theorems ---------------------------------------------------

inline std::vector<Check> verify_mixture(const VerifyOptions& opt) {
  double worst_mix = 0.0, worst_mean = 0.0, worst_binom = 0.0;
  std::size_t n_mix = 0, n_mean = 0, n_binom = 0;
  for (double lambda : {0.5, 1.0, 5.0})
    for (double alpha : {0.5, 1.0, 2.0, 10.0}) {
      for (Count y = 0; y <= 10; ++y) {
        worst_mix = std::max(worst_mix, std::abs(mixture_pmf(y, lambda, alpha) - nb_pmf(y, lambda, alpha)));
        ++n_mix;
      }
      worst_mean = std::max(worst_mean, std::abs(nb_mean_bruteforce(lambda, alpha, opt.eps_tail) - lambda));
      ++n_mean;
    }
  for (double lambda : {0.5, 1.0, 5.0})
    for (double alpha : {1.0, 2.0, 3.0})
      for (Count y = 0; y <= 10; ++y) {
        worst_binom = std::max(worst_binom, detail::rel_diff(nb_pmf_binomial_form(y, lambda, alpha),
                                                             nb_pmf(y, lambda, alpha), 0.0));
        ++n_binom;
      }
  return {
      detail::make_check("mixture", "mixture_pmf~nb_pmf", Expectation::HOLDS, opt.mixture_tol, worst_mix, n_mix,
                         "absolute; y in 0..10, lambda in {0.5,1,5}, alpha in {0.5,1,2,10}"),
      detail::make_check("mixture", "truncated_mean~lambda", Expectation::HOLDS, opt.mean_tol, worst_mean, n_mean,
                         "absolute"),
      detail::make_check("mixture", "binomial_form~nb_pmf", Expectation::HOLDS, opt.binomial_form_tol, worst_binom,
                         n_binom, "relative; alpha in {1,2,3}"),
  };
}

// Expected information -------------------------------------------------------

struct FisherGridResult {
  std::vector<Check> checks;
  TailConvention convention = TailConvention::GE_J_PLUS_1;
};

inline FisherGridResult verify_fisher(const VerifyOptions& opt) {
  double worst_b = 0.0, worst_a = 0.0, worst_info = 0.0, min_info = std::numeric_limits<double>::infinity();
  std::size_t pts = 0;
  int votes_b = 0, votes_a = 0;
  for (double lambda : {0.2, 1.0, 5.0})
    for (double theta : {0.2, 1.0, 3.0}) {
      const auto t = expected_trigamma_tail(lambda, theta, opt.eps_tail);
      worst_b = std::max(worst_b, t.residual(TailConvention::GE_J_PLUS_1));
      worst_a = std::max(worst_a, t.residual(TailConvention::GE_J));
      (t.matching() == TailConvention::GE_J_PLUS_1 ? votes_b : votes_a)++;

      Eigen::MatrixXd X(1, 1);
      X(0, 0) = 1.0;
      const Dataset ds({0}, X);
      const Params prm(Eigen::VectorXd::Constant(1, std::log(lambda)), theta);
      const auto info = expected_info_theta(ds, prm, opt.eps_tail);
      const double brute = brute_force_expected_neg_hessian(lambda, theta, opt.eps_tail);
      worst_info = std::max(worst_info, detail::rel_diff(info.value, brute, 0.0));
      min_info = std::min(min_info, info.value);
      ++pts;
    }
  FisherGridResult out;
  out.convention = votes_b >= votes_a ? TailConvention::GE_J_PLUS_1 : TailConvention::GE_J;
  out.checks = {
      detail::make_check("fisher", "tail_ge_j_plus_1~double_sum", Expectation::HOLDS, opt.interchange_tol, worst_b,
                         pts, "relative; lambda in {0.2,1,5}, theta in {0.2,1,3}"),
      detail::make_check("fisher", "tail_ge_j~double_sum", Expectation::FAILS, opt.interchange_tol, worst_a, pts,
                         "relative; off-by-one tail index"),
      detail::make_check("fisher", "expected_info_theta~brute_force", Expectation::HOLDS, opt.fisher_tol, worst_info,
                         pts, "relative"),
      detail::make_check("fisher", "expected_info_theta_positive", Expectation::HOLDS, 0.0,
                         min_info > 0.0 ? 0.0 : -min_info + 1.0, pts, "min over grid " + std::to_string(min_info)),
  };
  return out;
}

// Zero-mean scores -----------------------------------------------------------

inline std::vector<Check> verify_zero_mean_score(const VerifyOptions& opt) {
  double worst_theta = 0.0, worst_beta = 0.0;
  std::size_t pts = 0;
  for (double lambda : {0.2, 1.0, 5.0, 20.0})
    for (double theta : {0.1, 0.5, 1.0, 3.0}) {
      worst_theta = std::max(worst_theta, std::abs(pmf_weighted_sum(lambda, theta, opt.eps_tail, [&](Count y) {
                                            return obs::score_theta(y, lambda, theta);
                                          })));
      worst_beta = std::max(worst_beta, std::abs(pmf_weighted_sum(lambda, theta, opt.eps_tail, [&](Count y) {
                                           return obs::score_beta_weight(y, lambda, theta);
                                         })));
      ++pts;
    }
  return {
      detail::make_check("score", "E[score_theta]=0", Expectation::HOLDS, opt.zero_score_tol, worst_theta, pts),
      detail::make_check("score", "E[score_beta]=0", Expectation::HOLDS, opt.zero_score_tol, worst_beta, pts),
  };
}

// Finite-difference sweep ----------------------------------------------------

/// A random regression problem: intercept plus standard-normal regressors,
/// beta ~ U(-1, 1), theta ~ U(0.1, 5), y drawn from the model.
struct RandomInstance {
  Dataset ds;
  Params params;
};

inline RandomInstance random_instance(Rng& rng, std::size_t max_n = 50, std::size_t max_p = 4) {
  const std::size_t p = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_p));
  const std::size_t n = std::max<std::size_t>(p + 1, 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_n)));
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < X.cols(); ++k) X(i, k) = rng.normal();
  }
  Eigen::VectorXd beta(static_cast<Eigen::Index>(p));
  for (Eigen::Index k = 0; k < beta.size(); ++k) beta(k) = 2.0 * rng.uniform() - 1.0;
  const double theta = 0.1 + 4.9 * rng.uniform();
  const Eigen::VectorXd lambda = (X * beta).array().exp();
  std::vector<Count> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = draw_nb(rng, lambda(static_cast<Eigen::Index>(i)), theta);
  return {Dataset(std::move(y), std::move(X)), Params(std::move(beta), theta)};
}

/// Largest relative discrepancy between each analytic derivative block and
/// central finite differences of the log-likelihood.
struct DerivativeErrors {
  double score_beta = 0.0, score_theta = 0.0, h_bb = 0.0, h_bt = 0.0, h_tt = 0.0;
  double score_theta_gamma_form = 0.0;  // reported only
  double max_block() const { return std::max({score_beta, score_theta, h_bb, h_bt, h_tt}); }
};

/// |a - f| / max(|a|, |f|, 1): relative for entries of order one and above,
/// absolute below.
inline double derivative_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1.0});
}

inline DerivativeErrors derivative_errors(const Dataset& ds, const Params& prm) {
  const Eigen::Index p = static_cast<Eigen::Index>(ds.p());
  Eigen::VectorXd z(p + 1);
  z.head(p) = prm.beta();
  z(p) = prm.theta();
  auto ll = [&](const Eigen::VectorXd& v) { return loglik(ds, Params(v.head(p), v(p))); };
  auto along = [&](Eigen::Index k) {
    return [&, k](double x) {
      Eigen::VectorXd v = z;
      v(k) = x;
      return ll(v);
    };
  };
  const GradHess g = grad_hess(ds, prm);
  DerivativeErrors e;

  Eigen::VectorXd fd_grad(p + 1);
  for (Eigen::Index k = 0; k <= p; ++k) fd_grad(k) = fd::central(along(k), z(k), fd::default_step_first(z(k)));
  for (Eigen::Index k = 0; k < p; ++k)
    e.score_beta = std::max(e.score_beta, derivative_rel_error(g.score_beta(k), fd_grad(k)));
  e.score_theta = derivative_rel_error(g.score_theta, fd_grad(p));
  e.score_theta_gamma_form = derivative_rel_error(score_theta_gamma_form(ds, prm), fd_grad(p));

  // Second derivatives: three-point diagonal, four-point mixed stencil.
  auto mixed = [&](Eigen::Index a, Eigen::Index b) {
    const double ha = fd::default_step_second(z(a)), hb = fd::default_step_second(z(b));
    auto f = [&](double da, double db) {
      Eigen::VectorXd v = z;
      v(a) += da;
      v(b) += db;
      return ll(v);
    };
    return (f(ha, hb) - f(ha, -hb) - f(-ha, hb) + f(-ha, -hb)) / (4.0 * ha * hb);
  };
  for (Eigen::Index a = 0; a <= p; ++a)
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double num = a == b ? fd::central_second(along(a), z(a), fd::default_step_second(z(a))) : mixed(a, b);
      if (a < p) {
        e.h_bb = std::max(e.h_bb, derivative_rel_error(g.h_bb(a, b), num));
      } else if (b < p) {
        e.h_bt = std::max(e.h_bt, derivative_rel_error(g.h_bt(b), num));
      } else {
        e.h_tt = derivative_rel_error(g.h_tt, num);
      }
    }
  return e;
}

inline std::vector<Check> verify_derivatives(const VerifyOptions& opt) {
  Rng rng(opt.seed, 7);
  DerivativeErrors worst;
  for (int k = 0; k < opt.derivative_instances; ++k) {
    const RandomInstance inst = random_instance(rng);
    const DerivativeErrors e = derivative_errors(inst.ds, inst.params);
    worst.score_beta = std::max(worst.score_beta, e.score_beta);
    worst.score_theta = std::max(worst.score_theta, e.score_theta);
    worst.h_bb = std::max(worst.h_bb, e.h_bb);
    worst.h_bt = std::max(worst.h_bt, e.h_bt);
    worst.h_tt = std::max(worst.h_tt, e.h_tt);
    worst.score_theta_gamma_form = std::max(worst.score_theta_gamma_form, e.score_theta_gamma_form);
  }
  const auto n = static_cast<std::size_t>(opt.derivative_instances);
  const double tol = opt.derivative_tol;
  return {
      detail::make_check("derivatives", "score_beta~fd", Expectation::HOLDS, tol, worst.score_beta, n),
      detail::make_check("derivatives", "score_theta~fd", Expectation::HOLDS, tol, worst.score_theta, n),
      detail::make_check("derivatives", "hessian_beta_beta~fd", Expectation::HOLDS, tol, worst.h_bb, n),
      detail::make_check("derivatives", "hessian_beta_theta~fd", Expectation::HOLDS, tol, worst.h_bt, n),
      detail::make_check("derivatives", "hessian_theta~fd", Expectation::HOLDS, tol, worst.h_tt, n),
      detail::make_check("derivatives", "score_theta_gamma_form~fd", Expectation::FAILS, tol,
                         worst.score_theta_gamma_form, n, "digamma form of the theta score"),
  };
}

inline VerifyReport run_verification(const VerifyOptions& opt = {}) {
  VerifyReport rep;
  rep.identities = run_identity_suite(opt.identity_grid, opt.identity_tol);
  for (auto& c : verify_mixture(opt)) rep.checks.push_back(std::move(c));
  auto fisher = verify_fisher(opt);
  rep.fisher_convention = fisher.convention;
  for (auto& c : fisher.checks) rep.checks.push_back(std::move(c));
  for (auto& c : verify_zero_mean_score(opt)) rep.checks.push_back(std::move(c));
  for (auto& c : verify_derivatives(opt)) rep.checks.push_back(std::move(c));
  return rep;
}

}  // namespace nbreg
