#pragma once

// First and second derivatives of the NB2 log-likelihood.
//
// The estimator uses the gamma-free theta derivatives (finite sums over
// j < y). The *_gamma_form functions apply digamma/trigamma differences in
// place of the derivatives of ln[Gamma(y + 1/theta) / Gamma(1/theta)] and are
// kept only for comparison; they do not match finite differences of the
// log-likelihood whenever some y_i > 0.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>

#include "errors.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "special.hpp"

namespace nbreg {

struct GradHess {
  Eigen::VectorXd score_beta;
  double score_theta = 0.0;
  Eigen::MatrixXd h_bb;
  Eigen::VectorXd h_bt;
  double h_tt = 0.0;
};

// Per-observation pieces. `lambda` is exp(x_i' beta).
namespace obs {

inline double score_theta(Count y, double lambda, double theta) {
  const double yd = static_cast<double>(y);
  const double u = 1.0 + theta * lambda;
  return (-sum_recip_shifted(y, theta) + std::log1p(theta * lambda)) / (theta * theta) +
         (yd - lambda) / (theta * u);
}

inline double score_theta_gamma_form(Count y, double lambda, double theta) {
  const double yd = static_cast<double>(y);
  const double u = 1.0 + theta * lambda;
  const double a = 1.0 / theta;
  const double psi_diff = y == 0 ? 0.0 : digamma(yd + a) - digamma(a);
  return std::log1p(theta * lambda) / (theta * theta) + (yd - lambda) / (theta * u) + psi_diff;
}

// The bracketed non-sum part of the second theta derivative, before the
// -theta^-3 factor.
inline double hessian_theta_bracket(Count y, double lambda, double theta) {
  const double yd = static_cast<double>(y);
  const double u = 1.0 + theta * lambda;
  return (theta * (1.0 + 2.0 * theta * lambda) * (yd - lambda) - theta * lambda * u) / (u * u) +
         2.0 * std::log1p(theta * lambda);
}

inline double hessian_theta(Count y, double lambda, double theta) {
  const double t3 = theta * theta * theta;
  return (sum_trigamma_weights(y, theta) - hessian_theta_bracket(y, lambda, theta)) / t3;
}

inline double hessian_theta_gamma_form(Count y, double lambda, double theta) {
  const double a = 1.0 / theta;
  const double tri_diff = y == 0 ? 0.0 : trigamma(static_cast<double>(y) + a) - trigamma(a);
  return -hessian_theta_bracket(y, lambda, theta) / (theta * theta * theta) + tri_diff;
}

// d score_beta / d eta, multiplies x_i x_i'
inline double hessian_beta_weight(Count y, double lambda, double theta) {
  const double u = 1.0 + theta * lambda;
  return -lambda * (1.0 + theta * static_cast<double>(y)) / (u * u);
}

// d score_beta / d theta, multiplies x_i
inline double hessian_cross_weight(Count y, double lambda, double theta) {
  const double u = 1.0 + theta * lambda;
  return -lambda * (static_cast<double>(y) - lambda) / (u * u);
}

inline double score_beta_weight(Count y, double lambda, double theta) {
  return (static_cast<double>(y) - lambda) / (1.0 + theta * lambda);
}

}  // namespace obs

namespace detail {

template <typename Fn>
double sum_over_obs(const Dataset& ds, const Params& p, Fn&& fn) {
  const LinkValues link = link_mean(ds, p);
  const double theta = p.theta();
  return reduce_terms(ds.n(), [&](std::size_t i) {
    return fn(ds.y()[i], link.lambda(static_cast<Eigen::Index>(i)), theta);
  });
}

// sum_i w_i x_i with deterministic pairwise ordering per component
template <typename Fn>
Eigen::VectorXd weighted_column_sum(const Dataset& ds, const LinkValues& link, double theta, Fn&& fn) {
  const auto n = ds.n();
  std::vector<double> w(n);
  parallel_for(n, [&](std::size_t i) { w[i] = fn(ds.y()[i], link.lambda(static_cast<Eigen::Index>(i)), theta); });
  Eigen::VectorXd out(static_cast<Eigen::Index>(ds.p()));
  std::vector<double> buf(n);
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = w[i] * ds.X()(static_cast<Eigen::Index>(i), k);
    out(k) = pairwise_sum(buf);
  }
  return out;
}

template <typename Fn>
Eigen::MatrixXd weighted_gram(const Dataset& ds, const LinkValues& link, double theta, Fn&& fn) {
  const auto n = ds.n();
  std::vector<double> w(n);
  parallel_for(n, [&](std::size_t i) { w[i] = fn(ds.y()[i], link.lambda(static_cast<Eigen::Index>(i)), theta); });
  const auto pp = static_cast<Eigen::Index>(ds.p());
  Eigen::MatrixXd out(pp, pp);
  std::vector<double> buf(n);
  for (Eigen::Index a = 0; a < pp; ++a)
    for (Eigen::Index b = 0; b <= a; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        buf[i] = w[i] * ds.X()(ii, a) * ds.X()(ii, b);
      }
      out(a, b) = out(b, a) = pairwise_sum(buf);
    }
  return out;
}

}  // namespace detail

inline Eigen::VectorXd score_beta(const Dataset& ds, const Params& p) {
  return detail::weighted_column_sum(ds, link_mean(ds, p), p.theta(), obs::score_beta_weight);
}

inline double score_theta(const Dataset& ds, const Params& p) {
  return detail::sum_over_obs(ds, p, obs::score_theta);
}

inline double score_theta_gamma_form(const Dataset& ds, const Params& p) {
  return detail::sum_over_obs(ds, p, obs::score_theta_gamma_form);
}

inline double hessian_theta(const Dataset& ds, const Params& p) {
  return detail::sum_over_obs(ds, p, obs::hessian_theta);
}

inline double hessian_theta_gamma_form(const Dataset& ds, const Params& p) {
  return detail::sum_over_obs(ds, p, obs::hessian_theta_gamma_form);
}

inline Eigen::MatrixXd hessian_beta_beta(const Dataset& ds, const Params& p) {
  return detail::weighted_gram(ds, link_mean(ds, p), p.theta(), obs::hessian_beta_weight);
}

inline Eigen::VectorXd hessian_beta_theta(const Dataset& ds, const Params& p) {
  return detail::weighted_column_sum(ds, link_mean(ds, p), p.theta(), obs::hessian_cross_weight);
}

/// All first and second derivatives at once (one link evaluation).
inline GradHess grad_hess(const Dataset& ds, const Params& p) {
  const LinkValues link = link_mean(ds, p);
  const double theta = p.theta();
  GradHess g;
  g.score_beta = detail::weighted_column_sum(ds, link, theta, obs::score_beta_weight);
  g.h_bb = detail::weighted_gram(ds, link, theta, obs::hessian_beta_weight);
  g.h_bt = detail::weighted_column_sum(ds, link, theta, obs::hessian_cross_weight);
  g.score_theta = reduce_terms(ds.n(), [&](std::size_t i) {
    return obs::score_theta(ds.y()[i], link.lambda(static_cast<Eigen::Index>(i)), theta);
  });
  g.h_tt = reduce_terms(ds.n(), [&](std::size_t i) {
    return obs::hessian_theta(ds.y()[i], link.lambda(static_cast<Eigen::Index>(i)), theta);
  });
  return g;
}

// Finite differences -------------------------------------------------------

namespace fd {

using ScalarFn = std::function<double(double)>;

inline double default_step_first(double x0) { return 1e-5 * (1.0 + std::abs(x0)); }
inline double default_step_second(double x0) { return 1e-4 * (1.0 + std::abs(x0)); }

namespace detail {
inline double eval(const ScalarFn& f, double x) {
  const double v = f(x);
  if (!std::isfinite(v)) throw DomainError("finite_diff: non-finite evaluation at x = " + std::to_string(x));
  return v;
}
}  // namespace detail

/// Central difference (f(x0+h) - f(x0-h)) / 2h.
inline double central(const ScalarFn& f, double x0, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff: step must be positive");
  return (detail::eval(f, x0 + h) - detail::eval(f, x0 - h)) / (2.0 * h);
}

/// Central second difference (f(x0+h) - 2 f(x0) + f(x0-h)) / h^2.
inline double central_second(const ScalarFn& f, double x0, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff: step must be positive");
  return (detail::eval(f, x0 + h) - 2.0 * detail::eval(f, x0) + detail::eval(f, x0 - h)) / (h * h);
}

/// Fourth-order five-point stencil for f'(x0).
inline double five_point(const ScalarFn& f, double x0, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff: step must be positive");
  const double d1 = detail::eval(f, x0 + h) - detail::eval(f, x0 - h);
  const double d2 = detail::eval(f, x0 + 2.0 * h) - detail::eval(f, x0 - 2.0 * h);
  return (8.0 * d1 - d2) / (12.0 * h);
}

/// Richardson-extrapolated second difference, O(h^4).
inline double richardson_second(const ScalarFn& f, double x0, double h) {
  return (4.0 * central_second(f, x0, 0.5 * h) - central_second(f, x0, h)) / 3.0;
}

}  // namespace fd

inline double finite_diff(const fd::ScalarFn& f, double x0, double h) { return fd::central(f, x0, h); }
inline double finite_diff_second(const fd::ScalarFn& f, double x0, double h) {
  return fd::central_second(f, x0, h);
}

}  // namespace nbreg
