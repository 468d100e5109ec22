#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nbreg/errors.hpp"
#include "nbreg/model.hpp"
#include "support.hpp"

using namespace nbreg;
using testsupport::single;

TEST(Dataset, ValidatesShapeAndValues) {
  EXPECT_THROW(Dataset({1, 2}, Eigen::MatrixXd::Ones(3, 1)), DomainError);
  EXPECT_THROW(Dataset({1}, Eigen::MatrixXd::Ones(1, 2)), DomainError);
  EXPECT_THROW(Dataset({1, -1}, Eigen::MatrixXd::Ones(2, 1)), DomainError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 1);
  bad(1, 0) = std::nan("");
  EXPECT_THROW(Dataset({1, 2}, bad), DomainError);
  EXPECT_THROW(Dataset({1, 2}, Eigen::MatrixXd::Ones(2, 1), {"a", "b"}), DomainError);
}

TEST(Dataset, RejectsSecondConstantColumn) {
  Eigen::MatrixXd X(3, 2);
  X << 1, 2, 1, 2, 1, 2;
  EXPECT_THROW(Dataset({0, 1, 2}, X), DomainError);
  X.col(1) << 0, 0, 0;
  EXPECT_NO_THROW(Dataset({0, 1, 2}, X));
}

TEST(Dataset, DefaultNames) {
  const Dataset ds({0, 1, 2}, Eigen::MatrixXd::Ones(3, 1));
  ASSERT_EQ(ds.names().size(), 1u);
  EXPECT_EQ(ds.names()[0], "x0");
}

TEST(Params, ThetaMustBePositive) {
  EXPECT_THROW(Params(Eigen::VectorXd::Zero(1), 0.0), DomainError);
  EXPECT_THROW(Params(Eigen::VectorXd::Zero(1), -1.0), DomainError);
  EXPECT_THROW(Params(Eigen::VectorXd::Constant(1, INFINITY), 1.0), DomainError);
  EXPECT_DOUBLE_EQ(Params(Eigen::VectorXd::Zero(1), 4.0).alpha(), 0.25);
}

TEST(LinkMean, ZeroBetaGivesUnitMean) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 3);
  const LinkValues l = link_mean(X, Eigen::VectorXd::Zero(3));
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_EQ(l.lambda(i), 1.0);
}

TEST(LinkMean, InterceptOnlyActive) {
  Eigen::MatrixXd X(1, 2);
  X << 1, 0;
  Eigen::VectorXd b(2);
  b << std::log(2.0), 5.0;
  EXPECT_NEAR(link_mean(X, b).lambda(0), 2.0, 1e-15);
}

TEST(LinkMean, LogRoundTrip) {
  std::mt19937_64 eng(3);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(20, 3);
  Eigen::VectorXd b(3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = z(eng);
  for (Eigen::Index k = 0; k < 3; ++k) b(k) = z(eng);
  const LinkValues l = link_mean(X, b);
  const Eigen::VectorXd eta = X * b;
  for (Eigen::Index i = 0; i < 20; ++i) EXPECT_NEAR(std::log(l.lambda(i)), eta(i), 1e-12);
}

TEST(LinkMean, OverflowNamesRow) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
  X(2, 0) = 1000.0;
  try {
    link_mean(X, Eigen::VectorXd::Ones(1));
    FAIL() << "expected OverflowError";
  } catch (const OverflowError& e) {
    EXPECT_EQ(e.row(), 2u);
  }
}

TEST(NbPmf, GeometricAndHandValues) {
  EXPECT_NEAR(nb_pmf(0, 1.0, 1.0), 0.5, 1e-15);
  EXPECT_NEAR(nb_pmf(1, 1.0, 1.0), 0.25, 1e-15);
  EXPECT_NEAR(nb_pmf(0, 1.0, 2.0), 4.0 / 9.0, 1e-15);
}

TEST(NbPmf, MatchesBoostLgammaReference) {
  for (double lam : {0.01, 0.7, 3.0, 40.0})
    for (double alpha : {0.05, 0.5, 1.0, 7.0, 300.0})
      for (Count y : {0, 1, 3, 17, 64, 65, 500}) {
        const double ref = testsupport::ref_log_pmf(y, lam, alpha);
        EXPECT_NEAR(log_nb_pmf(y, lam, alpha), ref, 1e-10 * std::max(1.0, std::abs(ref)))
            << y << ' ' << lam << ' ' << alpha;
      }
}

TEST(NbPmf, DomainErrors) {
  EXPECT_THROW(nb_pmf(-1, 1.0, 1.0), DomainError);
  EXPECT_THROW(nb_pmf(0, 0.0, 1.0), DomainError);
  EXPECT_THROW(nb_pmf(0, 1.0, 0.0), DomainError);
}

TEST(NbPmf, NormalizesOverTruncatedSupport) {
  for (double lam : {0.1, 1.0, 5.0, 20.0})
    for (double alpha : {0.3, 1.0, 2.0, 10.0}) {
      TruncationInfo info;
      const double total = pmf_weighted_sum(lam, 1.0 / alpha, kDefaultEpsTail, [](Count) { return 1.0; }, &info);
      EXPECT_GE(total, 1.0 - 1e-9) << lam << ' ' << alpha;
      EXPECT_LE(total, 1.0 + 1e-12);
      EXPECT_GE(static_cast<double>(info.cutoff), truncation_floor(lam, 1.0 / alpha));
    }
}

TEST(BinomialForm, HandValues) {
  EXPECT_NEAR(nb_pmf_binomial_form(0, 3.0, 2.0), 0.16, 1e-15);
  EXPECT_NEAR(nb_pmf_binomial_form(1, 2.0, 2.0), 0.25, 1e-15);
}

TEST(BinomialForm, EqualsPmfForIntegerAlpha) {
  for (double alpha : {1.0, 2.0, 3.0})
    for (double lam : {0.2, 1.0, 4.5, 12.0})
      for (Count y = 0; y <= 30; ++y) {
        const double ref = nb_pmf(y, lam, alpha);
        EXPECT_NEAR(nb_pmf_binomial_form(y, lam, alpha), ref, 1e-12 * ref) << y << ' ' << lam << ' ' << alpha;
      }
}

TEST(BinomialForm, RejectsNonIntegerAlpha) { EXPECT_THROW(nb_pmf_binomial_form(1, 1.0, 1.5), DomainError); }

TEST(Loglik, DegenerateSingleObservation) {
  const Params prm(Eigen::VectorXd::Zero(1), 1.0);
  EXPECT_NEAR(loglik(single(0), prm), -std::numbers::ln2, 1e-15);
  EXPECT_NEAR(loglik_alpha(single(0), 1.0, Eigen::VectorXd::Zero(1)), -std::numbers::ln2, 1e-15);
  EXPECT_NEAR(loglik_alpha(single(1), 1.0, Eigen::VectorXd::Zero(1)), -2.0 * std::numbers::ln2, 1e-15);
}

TEST(Loglik, RandomInstancesMatchPmfSumAndAlphaForm) {
  std::mt19937_64 eng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    const auto [ds, prm] = testsupport::random_instance(eng);
    const LinkValues l = link_mean(ds, prm);
    double ref = 0.0;
    for (std::size_t i = 0; i < ds.n(); ++i)
      ref += testsupport::ref_log_pmf(ds.y()[i], l.lambda(static_cast<Eigen::Index>(i)), prm.alpha());
    const double ll = loglik(ds, prm);
    EXPECT_NEAR(ll, ref, 1e-10 * static_cast<double>(ds.n()) * std::max(1.0, std::abs(ref) / ds.n()));
    EXPECT_NEAR(ll, loglik_alpha(ds, prm.alpha(), prm.beta()), 1e-10);
  }
}

TEST(Loglik, PropagatesOverflow) {
  const Dataset ds = single(1, 800.0);
  EXPECT_THROW(loglik(ds, Params(Eigen::VectorXd::Ones(1), 1.0)), OverflowError);
}

TEST(TailProb, ExamplesAndProperties) {
  EXPECT_EQ(tail_prob(0, 2.3, 0.4), 1.0);
  for (Count j = 0; j < 30; ++j) EXPECT_NEAR(tail_prob(j, 1.0, 1.0), std::ldexp(1.0, -static_cast<int>(j)), 1e-15);
  for (double lam : {0.3, 2.0, 9.0})
    for (double theta : {0.2, 1.0, 4.0}) {
      double prev = 1.0;
      for (Count j = 0; j < 60; ++j) {
        const double t = tail_prob(j, lam, theta);
        EXPECT_LE(t, prev);
        EXPECT_NEAR(t - tail_prob(j + 1, lam, theta), nb_pmf(j, lam, 1.0 / theta), 1e-12);
        prev = t;
      }
    }
}

TEST(PmfStream, UpperTailMatchesTailProb) {
  PmfStream s(3.0, 0.7);
  for (int k = 0; k < 25; ++k) {
    EXPECT_NEAR(s.pmf(), nb_pmf(s.k(), 3.0, 1.0 / 0.7), 1e-14);
    EXPECT_NEAR(s.upper_tail(), tail_prob(s.k() + 1, 3.0, 0.7), 1e-13);
    s.advance();
  }
}

TEST(Loglik, BitIdenticalAcrossThreadCounts) {
  std::mt19937_64 eng(77);
  std::normal_distribution<double> z;
  const int n = 20000;
  Eigen::MatrixXd X(n, 2);
  std::vector<Count> y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = z(eng);
    y[static_cast<std::size_t>(i)] = i % 7;
  }
  const Dataset ds(std::move(y), std::move(X));
  const Params prm(Eigen::Vector2d(0.3, -0.2), 0.6);
  set_num_threads(1);
  const double one = loglik(ds, prm);
  set_num_threads(4);
  const double four = loglik(ds, prm);
  set_num_threads(1);
  EXPECT_EQ(one, four);
}

TEST(Parallel, WorkerExceptionsPropagate) {
  set_num_threads(4);
  EXPECT_THROW(parallel_for(100000, [](std::size_t i) {
                 if (i == 77777) throw DomainError("boom");
               }),
               DomainError);
  set_num_threads(1);
}

TEST(PmfStream, UpperTailStaysAboveTrueTailAndKeepsShrinking) {
  for (double lambda : {0.5, 5.0})
    for (double theta : {0.1, 2.0}) {
      PmfStream s(lambda, theta);
      double prev = 1.0;
      for (int k = 0; k < 400; ++k, s.advance()) {
        const double bound = s.upper_tail();
        // Exact tail by forward summation of the remaining mass.
        PmfStream rest = s;
        rest.advance();
        double exact = 0.0;
        for (int m = 0; m < 4000; ++m, rest.advance()) exact += rest.pmf();
        // 1 - cdf carries absolute rounding of a few ulps of 1.
        EXPECT_GE(bound, exact * (1.0 - 1e-12) - 1e-15) << lambda << " " << theta << " k=" << k;
        EXPECT_LE(bound, prev);
        // Far in the tail the geometric bound must stay tight, not stall.
        if (k >= 100) {
          EXPECT_LE(bound, 20.0 * exact) << lambda << " " << theta << " k=" << k;
        }
        prev = bound;
      }
    }
}

TEST(PmfWeightedSum, TerminatesWithGrowingSummandAtTightTolerance) {
  // A summand growing with y used to stall once 1 - cdf hit rounding level.
  TruncationInfo info;
  const double mean = pmf_weighted_sum(1.0, 0.1, 1e-14, [](Count y) { return static_cast<double>(y); }, &info);
  EXPECT_NEAR(mean, 1.0, 1e-12);
  EXPECT_LT(info.cutoff, 100);
}
