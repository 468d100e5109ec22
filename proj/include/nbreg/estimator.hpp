#pragma once

// Maximum-likelihood fit of (beta, theta).
//
// Joint Newton iterations in (beta, ln theta) with step halving. ln theta is
// bounded below by ln(theta_floor); when the iterate sits on that bound and
// the gradient points outward the theta coordinate is frozen and only beta
// moves. After three line searches that fail to find ascent the fit switches
// to maximising the profile likelihood over ln theta (golden section with an
// inner Newton solve for beta), then resumes joint Newton from there.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "derivatives.hpp"
#include "errors.hpp"
#include "fisher.hpp"
#include "model.hpp"

namespace nbreg {

enum class ThetaCoordinate { LOG_THETA, THETA };

struct FitOptions {
  int max_iter = 100;
  double grad_tol = 1e-8;
  double loglik_tol = 1e-10;
  InfoKind info_kind = InfoKind::OBSERVED;
  double theta_floor = 1e-6;
  double eps_tail = kDefaultEpsTail;
  ThetaCoordinate coordinate = ThetaCoordinate::LOG_THETA;  // THETA is for cross-checking only
  int max_halvings = 40;

  void validate() const {
    if (max_iter < 1) throw DomainError("FitOptions: max_iter must be >= 1");
    if (!(grad_tol > 0.0) || !(loglik_tol > 0.0) || !(theta_floor > 0.0) || !(eps_tail > 0.0))
      throw DomainError("FitOptions: tolerances must be positive");
  }
};

struct StandardErrors {
  bool available = false;
  Eigen::VectorXd values;  // beta_0 .. beta_{p-1}, theta; empty when unavailable
  std::string reason;
};

struct FitResult {
  Eigen::VectorXd beta_hat;
  double theta_hat = 0.0;
  StandardErrors se;
  double loglik_at_mle = 0.0;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  bool boundary_theta = false;
  double gradient_norm = 0.0;
  int failed_line_searches = 0;
  bool used_profile = false;
  InfoMatrix info;
  std::vector<std::string> names;

  Params params() const { return Params(beta_hat, theta_hat); }
};

/// Square roots of the diagonal of info^-1; unavailable unless info is
/// symmetric positive definite.
inline StandardErrors standard_errors(const InfoMatrix& info) {
  StandardErrors se;
  const Eigen::MatrixXd& m = info.m;
  if (m.rows() == 0 || m.rows() != m.cols()) {
    se.reason = "information matrix is empty or not square";
    return se;
  }
  if (!m.allFinite()) {
    se.reason = "information matrix has non-finite entries";
    return se;
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    se.reason = "information matrix is not symmetric";
    return se;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) {
    se.reason = "information matrix is not positive definite";
    return se;
  }
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  Eigen::VectorXd d = inv.diagonal();
  if ((d.array() <= 0.0).any() || !d.allFinite()) {
    se.reason = "inverse information has a non-positive diagonal";
    return se;
  }
  se.values = d.cwiseSqrt();
  se.available = true;
  return se;
}

/// Starting values: beta from least squares of ln(y + 0.5) on X, theta from
/// the method of moments on Var(y) = mu (1 + theta mu), clamped to [0.01, 100].
inline Params init_params(const Dataset& ds) {
  const Eigen::Index n = static_cast<Eigen::Index>(ds.n());
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = std::log(static_cast<double>(ds.y()[static_cast<std::size_t>(i)]) + 0.5);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ds.X());
  qr.setThreshold(1e-10);
  if (qr.rank() < ds.X().cols()) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < ds.X().cols(); ++k) {
      if (!cols.empty()) cols += ", ";
      cols += "'" + ds.names()[static_cast<std::size_t>(perm(k))] + "'";
    }
    throw CollinearityError("init_params: design matrix has rank " + std::to_string(qr.rank()) + " < " +
                            std::to_string(ds.X().cols()) + "; collinear column(s): " + cols);
  }
  Eigen::VectorXd beta = qr.solve(z);

  double mean = 0.0;
  for (Count y : ds.y()) mean += static_cast<double>(y);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (Count y : ds.y()) var += (static_cast<double>(y) - mean) * (static_cast<double>(y) - mean);
  var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
  const double theta = mean > 0.0 ? std::clamp((var - mean) / (mean * mean), 0.01, 100.0) : 1.0;
  return Params(std::move(beta), theta);
}

namespace detail {

class NewtonFitter {
 public:
  NewtonFitter(const Dataset& ds, const FitOptions& opt)
      : ds_(ds), opt_(opt), p_(static_cast<Eigen::Index>(ds.p())), lower_(lower_bound()) {}

  FitResult run() {
    const Params start = init_params(ds_);
    Eigen::VectorXd z(p_ + 1);
    z.head(p_) = start.beta();
    z(p_) = to_coord(std::max(start.theta(), opt_.theta_floor));
    FitResult res;
    double ll = loglik_at(z);
    if (!std::isfinite(ll)) {
      // Fall back to an intercept-style start if least squares lands far away.
      z.head(p_).setZero();
      ll = loglik_at(z);
    }
    res.loglik_trace.push_back(ll);

    int small_changes = 0;
    bool profile_done = false;
    for (int it = 0; it < opt_.max_iter; ++it) {
      Derivs d = derivs_at(z);
      const bool frozen = on_floor(z) && d.g(p_) < 0.0;
      if (projected_norm(d.g, frozen) <= opt_.grad_tol) break;

      const Eigen::VectorXd dir = newton_direction(d, frozen);
      const auto step = line_search(z, ll, d.g, dir, frozen);
      res.iterations = it + 1;
      if (!step) {
        ++res.failed_line_searches;
        if (res.failed_line_searches >= 3 && !profile_done) {
          profile_done = true;
          res.used_profile = true;
          z = profile_maximise(z);
          ll = loglik_at(z);
          res.loglik_trace.push_back(ll);
          small_changes = 0;
          continue;
        }
        if (profile_done && res.failed_line_searches >= 6) break;
        continue;
      }
      const double change = step->second - ll;
      z = step->first;
      ll = step->second;
      res.loglik_trace.push_back(ll);
      small_changes = std::abs(change) <= opt_.loglik_tol ? small_changes + 1 : 0;
      if (small_changes >= 3) break;
    }

    const Derivs d = derivs_at(z);
    const bool frozen = on_floor(z) && d.g(p_) < 0.0;
    res.gradient_norm = projected_norm(d.g, frozen);
    res.converged = res.gradient_norm <= opt_.grad_tol;
    res.beta_hat = z.head(p_);
    res.theta_hat = from_coord(z(p_));
    res.boundary_theta = res.theta_hat <= opt_.theta_floor * (1.0 + 1e-9);
    res.loglik_at_mle = ll;
    res.names = ds_.names();
    res.info = information(ds_, res.params(), opt_.info_kind, opt_.eps_tail);
    res.se = standard_errors(res.info);
    return res;
  }

 private:
  struct Derivs {
    Eigen::VectorXd g;  // gradient in the search coordinates
    Eigen::MatrixXd H;  // Hessian in the search coordinates
  };

  bool log_coord() const { return opt_.coordinate == ThetaCoordinate::LOG_THETA; }
  double to_coord(double theta) const { return log_coord() ? std::log(theta) : theta; }
  double from_coord(double c) const { return log_coord() ? std::exp(c) : c; }
  double lower_bound() const { return to_coord(opt_.theta_floor); }
  bool on_floor(const Eigen::VectorXd& z) const { return z(p_) <= lower_ + 1e-12 * (1.0 + std::abs(lower_)); }

  Params params_at(const Eigen::VectorXd& z) const { return Params(z.head(p_), from_coord(z(p_))); }

  double loglik_at(const Eigen::VectorXd& z) const {
    try {
      return loglik(ds_, params_at(z));
    } catch (const OverflowError&) {
      return -std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
      return -std::numeric_limits<double>::infinity();
    }
  }

  Derivs derivs_at(const Eigen::VectorXd& z) const {
    const Params prm = params_at(z);
    const GradHess gh = grad_hess(ds_, prm);
    const double theta = prm.theta();
    Derivs d;
    d.g.resize(p_ + 1);
    d.H.resize(p_ + 1, p_ + 1);
    d.g.head(p_) = gh.score_beta;
    d.H.topLeftCorner(p_, p_) = gh.h_bb;
    if (log_coord()) {
      // d/d ln theta = theta d/d theta
      d.g(p_) = theta * gh.score_theta;
      d.H.topRightCorner(p_, 1) = theta * gh.h_bt;
      d.H(p_, p_) = theta * theta * gh.h_tt + theta * gh.score_theta;
    } else {
      d.g(p_) = gh.score_theta;
      d.H.topRightCorner(p_, 1) = gh.h_bt;
      d.H(p_, p_) = gh.h_tt;
    }
    d.H.bottomLeftCorner(1, p_) = d.H.topRightCorner(p_, 1).transpose();
    return d;
  }

  double projected_norm(const Eigen::VectorXd& g, bool frozen) const {
    return frozen ? g.head(p_).norm() : g.norm();
  }

  // Solves (-H + mu I) d = g, increasing mu until the system is positive definite.
  static Eigen::VectorXd damped_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
    const Eigen::MatrixXd neg = -H;
    Eigen::LLT<Eigen::MatrixXd> llt(neg);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd dir = llt.solve(g);
      if (dir.allFinite() && dir.dot(g) > 0.0) return dir;
    }
    const double scale = std::max(1.0, neg.diagonal().cwiseAbs().maxCoeff());
    for (double mu = 1e-8 * scale; mu < 1e12 * scale; mu *= 10.0) {
      Eigen::MatrixXd reg = neg;
      reg.diagonal().array() += mu;
      Eigen::LLT<Eigen::MatrixXd> l2(reg);
      if (l2.info() != Eigen::Success) continue;
      Eigen::VectorXd dir = l2.solve(g);
      if (dir.allFinite() && dir.dot(g) > 0.0) return dir;
    }
    return g / scale;  // steepest ascent
  }

  Eigen::VectorXd newton_direction(const Derivs& d, bool frozen) const {
    if (!frozen) return damped_solve(d.H, d.g);
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(p_ + 1);
    dir.head(p_) = damped_solve(d.H.topLeftCorner(p_, p_), d.g.head(p_));
    return dir;
  }

  // Step halving until the log-likelihood does not decrease. Near the optimum,
  // where the predicted gain is below the rounding level of the
  // log-likelihood, the full step is taken if it reduces the gradient norm;
  // comparing log-likelihoods there would only compare rounding noise.
  std::optional<std::pair<Eigen::VectorXd, double>> line_search(const Eigen::VectorXd& z, double ll,
                                                                const Eigen::VectorXd& g, const Eigen::VectorXd& dir,
                                                                bool frozen) const {
    const double predicted = 0.5 * g.dot(dir);
    const double rounding = 1e-13 * (1.0 + std::abs(ll));
    if (predicted <= rounding) {
      Eigen::VectorXd trial = z + dir;
      trial(p_) = std::max(trial(p_), lower_);
      const double trial_ll = loglik_at(trial);
      if (std::isfinite(trial_ll) && trial_ll >= ll - rounding) {
        const Derivs dn = derivs_at(trial);
        const bool fz = on_floor(trial) && dn.g(p_) < 0.0;
        if (projected_norm(dn.g, fz) < projected_norm(g, frozen)) return std::make_pair(trial, std::max(trial_ll, ll));
      }
    }
    double t = 1.0;
    for (int k = 0; k <= opt_.max_halvings; ++k, t *= 0.5) {
      Eigen::VectorXd trial = z + t * dir;
      trial(p_) = std::max(trial(p_), lower_);
      const double trial_ll = loglik_at(trial);
      if (std::isfinite(trial_ll) && trial_ll >= ll) return std::make_pair(trial, trial_ll);
    }
    return std::nullopt;
  }

  // Newton in beta at fixed theta coordinate c; beta is warm-started from z.
  std::pair<Eigen::VectorXd, double> maximise_beta(Eigen::VectorXd z, double c) const {
    z(p_) = c;
    double ll = loglik_at(z);
    for (int it = 0; it < 100; ++it) {
      const Params prm = params_at(z);
      const Eigen::VectorXd g = score_beta(ds_, prm);
      if (g.norm() <= 0.1 * opt_.grad_tol) break;
      const Eigen::VectorXd dir = damped_solve(hessian_beta_beta(ds_, prm), g);
      bool moved = false;
      double t = 1.0;
      for (int k = 0; k <= opt_.max_halvings; ++k, t *= 0.5) {
        Eigen::VectorXd trial = z;
        trial.head(p_) += t * dir;
        const double tl = loglik_at(trial);
        if (std::isfinite(tl) && tl >= ll) {
          moved = (tl - ll) > 0.0 || t == 1.0;
          z = trial;
          ll = tl;
          break;
        }
      }
      if (!moved) break;
    }
    return {z, ll};
  }

  Eigen::VectorXd profile_maximise(const Eigen::VectorXd& z0) const {
    const double upper = to_coord(1e4);
    double a = lower_, b = upper;
    constexpr double kInvPhi = 0.6180339887498949;
    Eigen::VectorXd warm = z0;
    auto eval = [&](double c) {
      auto r = maximise_beta(warm, c);
      warm = r.first;
      return r;
    };
    double c1 = b - kInvPhi * (b - a), c2 = a + kInvPhi * (b - a);
    auto r1 = eval(c1), r2 = eval(c2);
    while (b - a > 1e-10 * (1.0 + std::abs(a) + std::abs(b))) {
      if (r1.second >= r2.second) {
        b = c2;
        c2 = c1;
        r2 = r1;
        c1 = b - kInvPhi * (b - a);
        r1 = eval(c1);
      } else {
        a = c1;
        c1 = c2;
        r1 = r2;
        c2 = a + kInvPhi * (b - a);
        r2 = eval(c2);
      }
    }
    auto best = r1.second >= r2.second ? r1 : r2;
    auto at_floor = maximise_beta(best.first, lower_);
    return at_floor.second > best.second ? at_floor.first : best.first;
  }

  const Dataset& ds_;
  FitOptions opt_;
  Eigen::Index p_;
  double lower_;
};

}  // namespace detail

inline FitResult fit(const Dataset& ds, const FitOptions& opts = {}) {
  opts.validate();
  if (std::all_of(ds.y().begin(), ds.y().end(), [](Count y) { return y == 0; }))
    throw DomainError("fit: all responses are zero; theta is not identifiable");
  return detail::NewtonFitter(ds, opts).run();
}

}  // namespace nbreg
