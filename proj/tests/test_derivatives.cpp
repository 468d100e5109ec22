#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nbreg/derivatives.hpp"
#include "nbreg/errors.hpp"
#include "support.hpp"

using namespace nbreg;
using std::numbers::ln2;
using testsupport::single;

namespace {

const Params kUnit(Eigen::VectorXd::Zero(1), 1.0);

// Design whose means are exactly the integers 1..n: x = ln k, beta = (0, 1).
Dataset mean_equals_count(int n) {
  Eigen::MatrixXd X(n, 2);
  std::vector<Count> y(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    X(k - 1, 0) = 1.0;
    X(k - 1, 1) = std::log(static_cast<double>(k));
    y[static_cast<std::size_t>(k - 1)] = k;
  }
  return Dataset(std::move(y), std::move(X));
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0}); }

}  // namespace

TEST(ScoreBeta, HandValueAndZeroResidual) {
  EXPECT_NEAR(score_beta(single(2), kUnit)(0), 0.5, 1e-15);
  const Dataset ds = mean_equals_count(8);
  const Eigen::VectorXd g = score_beta(ds, Params(Eigen::Vector2d(0.0, 1.0), 0.7));
  EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ScoreTheta, HandValueEmptySum) { EXPECT_NEAR(score_theta(single(0), kUnit), ln2 - 0.5, 1e-15); }

TEST(ScoreThetaGammaForm, ZeroCountsCoincide) {
  const Dataset ds({0, 0, 0}, Eigen::MatrixXd::Ones(3, 1));
  const Params prm(Eigen::VectorXd::Constant(1, 0.4), 1.7);
  EXPECT_EQ(score_theta_gamma_form(ds, prm), score_theta(ds, prm));
}

TEST(ScoreThetaGammaForm, DisagreesByTwoAtUnitPoint) {
  EXPECT_NEAR(score_theta_gamma_form(single(1), kUnit), ln2 + 1.0, 1e-14);
  EXPECT_NEAR(score_theta(single(1), kUnit), ln2 - 1.0, 1e-14);
  EXPECT_NEAR(score_theta_gamma_form(single(1), kUnit) - score_theta(single(1), kUnit), 2.0, 1e-14);
}

TEST(HessianTheta, HandValueEmptySum) {
  // -theta^-1 ln(1 + theta) differentiated twice at theta = 1.
  EXPECT_NEAR(hessian_theta(single(0), kUnit), 1.25 - 2.0 * ln2, 1e-14);
  const auto f = [](double t) { return score_theta(single(0), Params(Eigen::VectorXd::Zero(1), t)); };
  EXPECT_NEAR(hessian_theta(single(0), kUnit), fd::five_point(f, 1.0, 1e-3), 1e-10);
}

TEST(HessianTheta, ReducedFormWhenCountEqualsMean) {
  const double theta = 0.5;
  const Dataset ds = mean_equals_count(5);
  const Params prm(Eigen::Vector2d(0.0, 1.0), theta);
  double ref = 0.0;
  for (int k = 1; k <= 5; ++k) {
    const double lam = k;
    double w = 0.0;
    for (int j = 0; j < k; ++j) w += (2.0 * j + 1.0 / theta) / std::pow(j + 1.0 / theta, 2);
    ref += (w - 2.0 * std::log1p(theta * lam) + theta * lam / (1.0 + theta * lam)) / std::pow(theta, 3);
  }
  EXPECT_NEAR(hessian_theta(ds, prm), ref, 1e-11 * std::abs(ref));
}

TEST(HessianThetaGammaForm, ZeroCountsCoincide) {
  const Dataset ds({0, 0}, Eigen::MatrixXd::Ones(2, 1));
  const Params prm(Eigen::VectorXd::Constant(1, -0.2), 0.3);
  EXPECT_EQ(hessian_theta_gamma_form(ds, prm), hessian_theta(ds, prm));
}

TEST(HessianThetaGammaForm, UnitPointUsesTrigammaDifferenceOfMinusOne) {
  // trigamma(2) - trigamma(1) = -1; the weighted sum is w_0 = 1.
  const double bracket = obs::hessian_theta_bracket(1, 1.0, 1.0);
  EXPECT_NEAR(hessian_theta_gamma_form(single(1), kUnit), -bracket - 1.0, 1e-13);
  EXPECT_NEAR(hessian_theta(single(1), kUnit), 1.0 - bracket, 1e-13);
  EXPECT_NEAR(hessian_theta(single(1), kUnit) - hessian_theta_gamma_form(single(1), kUnit), 2.0, 1e-13);
}

TEST(HessianBetaBeta, HandValueAndPoissonLimit) {
  EXPECT_NEAR(hessian_beta_beta(single(1), kUnit)(0, 0), -0.5, 1e-15);
  std::mt19937_64 eng(5);
  const auto inst = testsupport::random_instance(eng, 30, 3);
  const Params near_poisson(inst.prm.beta(), 1e-8);
  const Eigen::MatrixXd h = hessian_beta_beta(inst.ds, near_poisson);
  const LinkValues l = link_mean(inst.ds, near_poisson);
  const Eigen::MatrixXd poisson = -(inst.ds.X().transpose() * l.lambda.asDiagonal() * inst.ds.X());
  EXPECT_LT((h - poisson).cwiseAbs().maxCoeff(), 1e-6 * poisson.cwiseAbs().maxCoeff());
}

TEST(HessianBetaTheta, HandValueAndZeroResidual) {
  EXPECT_NEAR(hessian_beta_theta(single(2), kUnit)(0), -0.25, 1e-15);
  const Eigen::VectorXd c = hessian_beta_theta(mean_equals_count(6), Params(Eigen::Vector2d(0.0, 1.0), 2.0));
  EXPECT_LT(c.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradHess, MatchesIndividualBlocks) {
  std::mt19937_64 eng(8);
  const auto [ds, prm] = testsupport::random_instance(eng);
  const GradHess gh = grad_hess(ds, prm);
  EXPECT_LT((gh.score_beta - score_beta(ds, prm)).norm(), 1e-12);
  EXPECT_NEAR(gh.score_theta, score_theta(ds, prm), 1e-12);
  EXPECT_LT((gh.h_bb - hessian_beta_beta(ds, prm)).norm(), 1e-10);
  EXPECT_LT((gh.h_bt - hessian_beta_theta(ds, prm)).norm(), 1e-10);
  EXPECT_NEAR(gh.h_tt, hessian_theta(ds, prm), 1e-9 * std::max(1.0, std::abs(gh.h_tt)));
}

TEST(FiniteDiff, QuadraticAndExponential) {
  const auto sq = [](double x) { return x * x; };
  for (double h : {1e-1, 1e-3, 1e-5}) EXPECT_NEAR(finite_diff(sq, 3.0, h), 6.0, 1e-9);
  EXPECT_NEAR(finite_diff([](double x) { return std::exp(x); }, 0.0, 1e-5), 1.0, 1e-9);
  EXPECT_NEAR(finite_diff_second([](double x) { return std::exp(x); }, 0.0, 1e-4), 1.0, 1e-6);
}

TEST(FiniteDiff, RejectsBadStepAndNonFiniteValues) {
  EXPECT_THROW(finite_diff([](double x) { return x; }, 0.0, 0.0), DomainError);
  EXPECT_THROW(finite_diff([](double x) { return std::log(x); }, 0.0, 1e-3), DomainError);
}

// Independent oracle: central differences of the log-likelihood itself.
class RandomInstanceDerivatives : public ::testing::TestWithParam<int> {};

TEST_P(RandomInstanceDerivatives, AnalyticBlocksMatchFiniteDifferences) {
  std::mt19937_64 eng(static_cast<std::uint64_t>(1000 + GetParam()));
  const auto [ds, prm] = testsupport::random_instance(eng);
  const auto p = static_cast<Eigen::Index>(ds.p());
  const double theta = prm.theta();
  const Eigen::VectorXd beta = prm.beta();
  auto ll_beta = [&](Eigen::Index k) {
    return [&, k](double b) {
      Eigen::VectorXd bb = beta;
      bb(k) = b;
      return loglik(ds, Params(bb, theta));
    };
  };
  const auto ll_theta = [&](double t) { return loglik(ds, Params(beta, t)); };

  const Eigen::VectorXd sb = score_beta(ds, prm);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double num = finite_diff(ll_beta(k), beta(k), fd::default_step_first(beta(k)));
    EXPECT_LT(rel(sb(k), num), 1e-6) << "score_beta " << k;
  }
  const double st = score_theta(ds, prm);
  EXPECT_LT(rel(st, fd::five_point(ll_theta, theta, 1e-3 * theta)), 1e-6) << "score_theta";

  const auto st_fn = [&](double t) { return score_theta(ds, Params(beta, t)); };
  EXPECT_LT(rel(hessian_theta(ds, prm), fd::five_point(st_fn, theta, 1e-3 * theta)), 1e-5) << "hessian_theta";

  const Eigen::MatrixXd hbb = hessian_beta_beta(ds, prm);
  const Eigen::VectorXd hbt = hessian_beta_theta(ds, prm);
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto col = [&](double b) {
      Eigen::VectorXd bb = beta;
      bb(k) = b;
      return score_beta(ds, Params(bb, theta));
    };
    const double h = fd::default_step_first(beta(k));
    const Eigen::VectorXd num = (col(beta(k) + h) - col(beta(k) - h)) / (2.0 * h);
    for (Eigen::Index r = 0; r < p; ++r) EXPECT_LT(rel(hbb(r, k), num(r)), 1e-5) << "h_bb " << r << k;
  }
  const auto sb_theta = [&](double t) { return score_beta(ds, Params(beta, t)); };
  const double ht = fd::default_step_first(theta) * theta;
  const Eigen::VectorXd num_bt = (sb_theta(theta + ht) - sb_theta(theta - ht)) / (2.0 * ht);
  for (Eigen::Index r = 0; r < p; ++r) EXPECT_LT(rel(hbt(r), num_bt(r)), 1e-5) << "h_bt " << r;
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomInstanceDerivatives, ::testing::Range(0, 25));
