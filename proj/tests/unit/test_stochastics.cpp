#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "qparisi/stochastics.hpp"

using namespace qparisi;

TEST(GaussHermite, TwoPointRule) {
  const auto rule = gauss_hermite(2);
  ASSERT_EQ(rule.size(), 2U);
  EXPECT_NEAR(std::min(rule.nodes[0], rule.nodes[1]), -1.0, 1e-14);
  EXPECT_NEAR(std::max(rule.nodes[0], rule.nodes[1]), 1.0, 1e-14);
  EXPECT_NEAR(rule.weights[0], 0.5, 1e-14);
  EXPECT_NEAR(rule.weights[1], 0.5, 1e-14);
}

TEST(GaussHermite, MomentsForAllSizes) {
  for (int n = 3; n <= 128; n += (n < 30 ? 1 : 7)) {
    const auto rule = gauss_hermite(n);
    double w = 0, m1 = 0, m2 = 0, m3 = 0, m4 = 0;
    for (std::size_t j = 0; j < rule.size(); ++j) {
      const double z = rule.nodes[j];
      w += rule.weights[j];
      m1 += rule.weights[j] * z;
      m2 += rule.weights[j] * z * z;
      m3 += rule.weights[j] * z * z * z;
      m4 += rule.weights[j] * z * z * z * z;
    }
    EXPECT_NEAR(w, 1.0, 1e-12) << n;
    EXPECT_NEAR(m1, 0.0, 1e-12) << n;
    EXPECT_NEAR(m3, 0.0, 1e-12) << n;
    EXPECT_NEAR(m2, 1.0, 1e-10) << n;
    EXPECT_NEAR(m4, 3.0, 1e-10) << n;
  }
}

TEST(GaussHermite, MatchesGolubWelschNodes) {
  const auto rule = gauss_hermite(24);
  auto [x, w] = oracle::hermite_rule(24);
  std::vector<std::pair<double, double>> got;
  for (std::size_t j = 0; j < rule.size(); ++j) got.emplace_back(rule.nodes[j], rule.weights[j]);
  std::sort(got.begin(), got.end());
  for (int j = 0; j < 24; ++j) {
    EXPECT_NEAR(got[j].first, x[j], 1e-10);
    EXPECT_NEAR(got[j].second, w[j], 1e-12);
  }
}

TEST(GaussHermite, CoshClosedForm) {
  const auto rule = gauss_hermite(24);
  for (double a : {0.1, 0.5, 1.0, 1.5, 2.0}) {
    double acc = 0.0;
    for (std::size_t j = 0; j < rule.size(); ++j) acc += rule.weights[j] * std::cosh(a * rule.nodes[j]);
    EXPECT_NEAR(acc, std::exp(a * a / 2), 1e-8) << a;
  }
}

TEST(GaussHermite, RejectsBadSizes) {
  EXPECT_THROW(gauss_hermite(1), std::invalid_argument);
  EXPECT_THROW(gauss_hermite(129), std::invalid_argument);
}

TEST(GaussLegendre, PolynomialExactness) {
  const auto rule = gauss_legendre_unit(8);
  for (int d = 0; d <= 15; ++d) {
    double acc = 0.0;
    for (std::size_t j = 0; j < rule.size(); ++j) acc += rule.weights[j] * std::pow(rule.nodes[j], d);
    EXPECT_NEAR(acc, 1.0 / (d + 1), 1e-14) << d;
  }
}

TEST(RngStream, Deterministic) {
  const RngStream a(42, {1, 2});
  const RngStream b(42, {1, 2});
  EXPECT_EQ(gaussian_samples(a, 100), gaussian_samples(b, 100));
  EXPECT_EQ(gaussian_samples(RngStream(7).child(3), 10), gaussian_samples(RngStream(7, {3}), 10));
}

TEST(RngStream, DistinctPathsDecorrelated) {
  const RngStream root(2024);
  const std::size_t n = 10000;
  for (std::uint64_t label = 0; label < 5; ++label) {
    const auto x = gaussian_samples(root.child(label), n);
    const auto y = gaussian_samples(root.child(label + 1), n);
    const auto mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const auto my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 0.05);
  }
  EXPECT_NE(gaussian_samples(RngStream(1), 4), gaussian_samples(RngStream(2), 4));
  EXPECT_NE(gaussian_samples(root.child(1).child(2), 4), gaussian_samples(root.child(2).child(1), 4));
}

TEST(GaussianSamples, MeanAndVariance) {
  const auto x = gaussian_samples(RngStream(99), 100000);
  const auto est = mc_estimate(x);
  double var = 0.0;
  for (double v : x) var += (v - est.mean) * (v - est.mean);
  var /= static_cast<double>(x.size() - 1);
  EXPECT_LT(std::abs(est.mean), 0.02);
  EXPECT_LT(std::abs(var - 1.0), 0.02);
}

TEST(GaussianSamples, AntitheticPairsCancel) {
  const auto z = gaussian_samples(RngStream(5), 50);
  for (double v : z) EXPECT_EQ(0.5 * (v + (-v)), 0.0);
}

TEST(McEstimate, ConstantHasZeroError) {
  const std::vector<double> v(10, 3.25);
  const auto est = mc_estimate(v);
  EXPECT_EQ(est.mean, 3.25);
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_EQ(est.n, 10U);
}

TEST(McEstimate, BalancedBinary) {
  const std::vector<double> v = {0, 1, 0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(mc_estimate(v).mean, 0.5);
}

TEST(McEstimate, HandComputedFiveValues) {
  // mean 3, sample variance 2.5, stderr sqrt(0.5)
  const std::vector<double> v = {1, 2, 3, 4, 5};
  const auto est = mc_estimate(v);
  EXPECT_DOUBLE_EQ(est.mean, 3.0);
  EXPECT_NEAR(est.std_error, std::sqrt(0.5), 1e-15);
}

TEST(McEstimate, NeedsTwoValues) {
  const std::vector<double> v = {1.0};
  EXPECT_THROW(mc_estimate(v), std::invalid_argument);
}

TEST(Summation, TenMillionTermTelescopingSum) {
  // sum_{i=1}^n 1/(i(i+1)) = 1 - 1/(n+1)
  const std::size_t n = 10'000'000;
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(i + 1);
    terms[i] = 1.0 / (k * (k + 1.0));
  }
  const double exact = 1.0 - 1.0 / (static_cast<double>(n) + 1.0);
  KahanSum kahan;
  for (double t : terms) kahan.add(t);
  EXPECT_LT(std::abs(kahan.value() - exact) / exact, 1e-10);
  EXPECT_LT(std::abs(pairwise_sum(terms) - exact) / exact, 1e-10);
}

TEST(Summation, TenMillionTenths) {
  // the double nearest 0.1 exceeds 1/10 by 5.55e-18
  const std::size_t n = 10'000'000;
  const std::vector<double> terms(n, 0.1);
  const double exact = 1e6 * (1.0 + 5.551115123125783e-17);
  KahanSum kahan;
  for (double t : terms) kahan.add(t);
  EXPECT_LT(std::abs(kahan.value() - exact) / exact, 1e-10);
  EXPECT_LT(std::abs(pairwise_sum(terms) - exact) / exact, 1e-10);
}

TEST(LogSumExp, NoOverflow) {
  const std::vector<double> xs = {1e4, 1e4, 1e4 - 50};
  EXPECT_NEAR(log_sum_exp(xs), 1e4 + std::log(2.0 + std::exp(-50.0)), 1e-9);
  LogSumExp acc;
  for (double x : xs) acc.add(x);
  EXPECT_NEAR(acc.value(), log_sum_exp(xs), 1e-9);
  LogSumExp empty;
  EXPECT_TRUE(empty.empty());
}

TEST(LogSumExp, Weighted) {
  const std::vector<double> lw = {std::log(0.25), std::log(0.75)};
  const std::vector<double> xs = {0.0, std::log(3.0)};
  EXPECT_NEAR(log_sum_exp_weighted(lw, xs), std::log(0.25 + 2.25), 1e-14);
}

TEST(ParallelFor, IndependentOfWorkers) {
  std::vector<double> a(257), b(257);
  const RngStream root(11);
  parallel_for(a.size(), 1, [&](std::size_t i) { a[i] = gaussian_samples(root.child(i), 3)[2]; });
  parallel_for(b.size(), 4, [&](std::size_t i) { b[i] = gaussian_samples(root.child(i), 3)[2]; });
  EXPECT_EQ(a, b);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
