#pragma once

// NB2 probability model: lambda_i = exp(x_i' beta), Var(y_i) = lambda_i (1 + theta lambda_i).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "special.hpp"

namespace nbreg {

/// Response counts with their design matrix. Immutable once constructed.
class Dataset {
 public:
  Dataset(std::vector<Count> y, Eigen::MatrixXd X, std::vector<std::string> names = {})
      : y_(std::move(y)), X_(std::move(X)), names_(std::move(names)) {
    validate();
  }

  const std::vector<Count>& y() const noexcept { return y_; }
  const Eigen::MatrixXd& X() const noexcept { return X_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t n() const noexcept { return y_.size(); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(X_.cols()); }

  auto row(std::size_t i) const { return X_.row(static_cast<Eigen::Index>(i)); }

 private:
  void validate() {
    if (static_cast<Eigen::Index>(y_.size()) != X_.rows())
      throw DomainError("Dataset: response length " + std::to_string(y_.size()) + " != design rows " +
                        std::to_string(X_.rows()));
    if (X_.cols() < 1) throw DomainError("Dataset: design matrix needs at least one column");
    if (y_.size() < p()) throw DomainError("Dataset: fewer observations than regressors");
    for (std::size_t i = 0; i < y_.size(); ++i)
      if (y_[i] < 0) throw DomainError("Dataset: negative count at row " + std::to_string(i + 1));
    if (!X_.allFinite()) throw DomainError("Dataset: design matrix has non-finite entries");
    if (names_.empty()) {
      for (std::size_t k = 0; k < p(); ++k) names_.push_back("x" + std::to_string(k));
    } else if (names_.size() != p()) {
      throw DomainError("Dataset: " + std::to_string(names_.size()) + " names for " + std::to_string(p()) +
                        " columns");
    }
    // At most one constant column: a second one would duplicate the intercept.
    std::ptrdiff_t first_constant = -1;
    for (Eigen::Index k = 0; k < X_.cols(); ++k) {
      const auto col = X_.col(k);
      if (col.size() > 0 && (col.array() == col(0)).all() && col(0) != 0.0) {
        if (first_constant >= 0)
          throw DomainError("Dataset: constant column '" + names_[static_cast<std::size_t>(k)] +
                            "' duplicates '" + names_[static_cast<std::size_t>(first_constant)] + "'");
        first_constant = k;
      }
    }
  }

  std::vector<Count> y_;
  Eigen::MatrixXd X_;
  std::vector<std::string> names_;
};

/// Regression coefficients and dispersion theta > 0; alpha = 1/theta.
class Params {
 public:
  Params(Eigen::VectorXd beta, double theta) : beta_(std::move(beta)), theta_(theta) {
    if (!(theta_ > 0.0) || !std::isfinite(theta_))
      throw DomainError("Params: theta must be positive and finite, got " + std::to_string(theta_));
    if (!beta_.allFinite()) throw DomainError("Params: beta has non-finite entries");
  }

  const Eigen::VectorXd& beta() const noexcept { return beta_; }
  double theta() const noexcept { return theta_; }
  double alpha() const noexcept { return 1.0 / theta_; }

 private:
  Eigen::VectorXd beta_;
  double theta_;
};

struct LinkValues {
  Eigen::VectorXd lambda;
  Eigen::VectorXd eta;  // linear predictor x_i' beta
};

/// |x_i' beta| above this is rejected instead of saturating exp().
inline constexpr double kMaxLinearPredictor = 700.0;

inline LinkValues link_mean(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
  if (X.cols() != beta.size())
    throw DomainError("link_mean: design has " + std::to_string(X.cols()) + " columns, beta has " +
                      std::to_string(beta.size()));
  LinkValues out;
  out.eta = X * beta;
  out.lambda.resize(out.eta.size());
  for (Eigen::Index i = 0; i < out.eta.size(); ++i) {
    const double e = out.eta(i);
    if (!std::isfinite(e) || std::abs(e) > kMaxLinearPredictor)
      throw OverflowError("link_mean: linear predictor " + std::to_string(e) + " out of range at row " +
                              std::to_string(i + 1),
                          static_cast<std::size_t>(i));
    out.lambda(i) = std::exp(e);
  }
  return out;
}

inline LinkValues link_mean(const Dataset& ds, const Params& p) { return link_mean(ds.X(), p.beta()); }

namespace detail {

inline void check_pmf_args(Count y, double lambda, double alpha, const char* fn) {
  require_count(y, fn);
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError(std::string(fn) + ": lambda must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError(std::string(fn) + ": alpha must be positive");
}

// ln[Gamma(y + a) / Gamma(a)]; the finite sum for small counts, log-gamma
// difference otherwise.
inline double log_gamma_ratio(Count y, double a) {
  if (y <= 64) return sum_log_shifted(y, a);
  return ln_gamma(static_cast<double>(y) + a) - ln_gamma(a);
}

}  // namespace detail

inline double log_nb_pmf(Count y, double lambda, double alpha) {
  detail::check_pmf_args(y, lambda, alpha, "nb_pmf");
  const double yd = static_cast<double>(y);
  // y ln(lambda/(lambda+alpha)) + alpha ln(alpha/(lambda+alpha))
  const double tail = (y == 0 ? 0.0 : -yd * std::log1p(alpha / lambda)) - alpha * std::log1p(lambda / alpha);
  return detail::log_gamma_ratio(y, alpha) - ln_gamma(yd + 1.0) + tail;
}

/// Negative binomial probability Pr(Y = y | lambda, alpha).
inline double nb_pmf(Count y, double lambda, double alpha) { return std::exp(log_nb_pmf(y, lambda, alpha)); }

/// Binomial-coefficient form C(y+alpha-1, y) r^y (1-r)^alpha, r = lambda/(lambda+alpha).
/// Only defined for integer alpha.
inline double nb_pmf_binomial_form(Count y, double lambda, double alpha) {
  detail::check_pmf_args(y, lambda, alpha, "nb_pmf_binomial_form");
  if (alpha != std::floor(alpha))
    throw DomainError("nb_pmf_binomial_form: alpha must be a positive integer, got " + std::to_string(alpha));
  const auto a = static_cast<Count>(alpha);
  // C(y + a - 1, y) = prod_{k=1}^{a-1} (y + k) / k, exact-ish in floating point
  double log_binom = 0.0;
  for (Count k = 1; k < a; ++k) log_binom += std::log(static_cast<double>(y + k) / static_cast<double>(k));
  const double r = lambda / (lambda + alpha);
  const double log_val =
      log_binom + static_cast<double>(y) * std::log(r) + alpha * std::log1p(-r);
  return std::exp(log_val);
}

/// Log-likelihood contribution of one observation in the dispersion form.
inline double loglik_term(Count y, double eta, double theta) {
  const double yd = static_cast<double>(y);
  const double lambda = std::exp(eta);
  return sum_log_shifted(y, 1.0 / theta) - ln_gamma(yd + 1.0) + yd * eta + yd * std::log(theta) -
         (1.0 / theta + yd) * std::log1p(theta * lambda);
}

/// Log-likelihood in (beta, theta), gamma-free form.
inline double loglik(const Dataset& ds, const Params& p) {
  const LinkValues link = link_mean(ds, p);
  const double theta = p.theta();
  return reduce_terms(ds.n(), [&](std::size_t i) {
    return loglik_term(ds.y()[i], link.eta(static_cast<Eigen::Index>(i)), theta);
  });
}

/// Log-likelihood in (beta, alpha), gamma-free form.
inline double loglik_alpha(const Dataset& ds, double alpha, const Eigen::VectorXd& beta) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("loglik_alpha: alpha must be positive");
  const LinkValues link = link_mean(ds.X(), beta);
  return reduce_terms(ds.n(), [&](std::size_t i) {
    const Count y = ds.y()[i];
    const double yd = static_cast<double>(y);
    const double lambda = link.lambda(static_cast<Eigen::Index>(i));
    return sum_log_shifted(y, alpha) - ln_gamma(yd + 1.0) + yd * std::log(lambda) - yd * std::log(alpha) -
           (alpha + yd) * std::log1p(lambda / alpha);
  });
}

/// Pr(Y >= j) = 1 - sum_{k<j} pmf(k), clamped to [0, 1].
inline double tail_prob(Count j, double lambda, double theta) {
  detail::require_count(j, "tail_prob");
  const double alpha = 1.0 / theta;
  detail::check_pmf_args(0, lambda, alpha, "tail_prob");
  if (j == 0) return 1.0;
  double cdf = 0.0;
  double pmf = nb_pmf(0, lambda, alpha);
  const double ratio = lambda / (lambda + alpha);
  for (Count k = 0; k < j; ++k) {
    cdf += pmf;
    pmf *= (static_cast<double>(k) + alpha) / static_cast<double>(k + 1) * ratio;
  }
  return std::clamp(1.0 - cdf, 0.0, 1.0);
}

/// Where a pmf-weighted series over the NB support was cut off.
struct TruncationInfo {
  Count cutoff = 0;          // last support point included
  double tail_mass = 0.0;    // Pr(Y > cutoff)
  double residual_bound = 0.0;
};

inline constexpr double kDefaultEpsTail = 1e-12;
inline constexpr Count kTailHardCap = 10'000'000;

/// Moment-based floor for the cutoff: lambda + 10 sd.
inline double truncation_floor(double lambda, double theta) {
  return lambda + 10.0 * std::sqrt(lambda * (1.0 + theta * lambda));
}

/// Streams pmf(0), pmf(1), ... via the ratio recurrence, tracking the upper
/// tail Pr(Y > k) as 1 - cdf.
class PmfStream {
 public:
  PmfStream(double lambda, double theta)
      : alpha_(1.0 / theta), ratio_(lambda / (lambda + alpha_)), pmf_(nb_pmf(0, lambda, alpha_)) {}

  Count k() const noexcept { return k_; }
  double pmf() const noexcept { return pmf_; }
  /// Pr(Y > k) after the current point has been accounted for. 1 - cdf stalls
  /// at rounding level, so once the term ratios are below one the geometric
  /// bound pmf(k+1) / (1 - q) takes over, q bounding every later ratio.
  double upper_tail() const noexcept {
    const double complement = std::max(0.0, 1.0 - cdf_ - pmf_);
    const double kd = static_cast<double>(k_);
    const double next = pmf_ * (kd + alpha_) / (kd + 1.0) * ratio_;
    // Ratios (j + alpha) / (j + 1) * ratio decrease in j when alpha > 1 and
    // increase toward ratio otherwise.
    const double q = alpha_ > 1.0 ? (kd + 1.0 + alpha_) / (kd + 2.0) * ratio_ : ratio_;
    if (q >= 1.0) return complement;
    return std::min(complement, next / (1.0 - q));
  }
  double cdf_through() const noexcept { return cdf_ + pmf_; }

  void advance() {
    cdf_ += pmf_;
    pmf_ *= (static_cast<double>(k_) + alpha_) / static_cast<double>(k_ + 1) * ratio_;
    ++k_;
  }

 private:
  double alpha_;
  double ratio_;
  double pmf_;
  double cdf_ = 0.0;
  Count k_ = 0;
};

/// Sums pmf(y) * g(y) over the support. Stops at the first cutoff Y* that is
/// at least the moment floor and where Pr(Y > Y*) * max(1, |g(Y*)|) falls
/// below eps_tail * (|partial sum| + 1).
template <typename G>
double pmf_weighted_sum(double lambda, double theta, double eps_tail, G&& g, TruncationInfo* info = nullptr) {
  if (!(eps_tail > 0.0)) throw DomainError("pmf_weighted_sum: eps_tail must be positive");
  const double floor = truncation_floor(lambda, theta);
  PmfStream s(lambda, theta);
  double sum = 0.0;
  double comp = 0.0;  // Kahan compensation
  for (;;) {
    const double gy = g(s.k());
    const double term = s.pmf() * gy - comp;
    const double t = sum + term;
    comp = (t - sum) - term;
    sum = t;
    const double tail = s.upper_tail();
    const double bound = tail * std::max(1.0, std::abs(gy));
    if (static_cast<double>(s.k()) >= floor && bound < eps_tail * (std::abs(sum) + 1.0)) {
      if (info) *info = {s.k(), tail, bound};
      return sum;
    }
    if (s.k() >= kTailHardCap)
      throw TruncationError("pmf_weighted_sum: tail not below tolerance after " + std::to_string(kTailHardCap) +
                            " terms (lambda=" + std::to_string(lambda) + ", theta=" + std::to_string(theta) + ")");
    s.advance();
  }
}

}  // namespace nbreg
