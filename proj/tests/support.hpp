#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "nbreg/model.hpp"

namespace testsupport {

struct Instance {
  nbreg::Dataset ds;
  nbreg::Params prm;
};

// Intercept plus N(0, 0.5^2) regressors, beta in (-1, 1), theta log-uniform
// in [0.05, 5], counts drawn from a Poisson-Gamma mixture with std::random.
inline Instance random_instance(std::mt19937_64& eng, int max_n = 50, int max_p = 4) {
  std::uniform_int_distribution<int> pd(1, max_p);
  const int p = pd(eng);
  std::uniform_int_distribution<int> nd(std::max(p, 5), max_n);
  const int n = nd(eng);
  std::normal_distribution<double> z(0.0, 0.5);
  std::uniform_real_distribution<double> ub(-1.0, 1.0);
  std::uniform_real_distribution<double> ut(std::log(0.05), std::log(5.0));

  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (int k = 1; k < p; ++k) X(i, k) = z(eng);
  }
  Eigen::VectorXd beta(p);
  for (int k = 0; k < p; ++k) beta(k) = ub(eng);
  const double theta = std::exp(ut(eng));
  std::vector<nbreg::Count> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double lam = std::exp(X.row(i).dot(beta));
    std::gamma_distribution<double> g(1.0 / theta, theta);
    std::poisson_distribution<nbreg::Count> po(lam * g(eng));
    y[static_cast<std::size_t>(i)] = po(eng);
  }
  return {nbreg::Dataset(std::move(y), std::move(X)), nbreg::Params(beta, theta)};
}

// Reference log p.m.f. through Boost's lgamma.
inline double ref_log_pmf(nbreg::Count y, double lambda, double alpha) {
  using boost::math::lgamma;
  const double yd = static_cast<double>(y);
  return lgamma(yd + alpha) - lgamma(yd + 1.0) - lgamma(alpha) + yd * std::log(lambda / (lambda + alpha)) +
         alpha * std::log(alpha / (lambda + alpha));
}

inline nbreg::Dataset single(nbreg::Count y, double x = 1.0) {
  return nbreg::Dataset({y}, Eigen::MatrixXd::Constant(1, 1, x));
}

}  // namespace testsupport
