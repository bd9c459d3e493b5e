#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smuce/segdp.hpp"

using namespace smuce;

TEST(IntervalThreshold, Values) {
  EXPECT_NEAR(*interval_threshold(1.0, 4, 4, PenaltyMode::sqrt), (1 + std::sqrt(2.0)) * (1 + std::sqrt(2.0)) / 8.0,
              1e-15);
  EXPECT_FALSE(interval_threshold(-5.0, 1, 10, PenaltyMode::sqrt).has_value());
  const ThresholdTable t(1.0, 10, 0.35);
  EXPECT_EQ(t.min_len(), 4u);
  EXPECT_EQ(t.at(3), kInf);
  EXPECT_TRUE(t.feasible(3));
  EXPECT_NEAR(t.at(4), *interval_threshold(1.0, 4, 10, PenaltyMode::sqrt), 0.0);
  const ThresholdTable neg(-1.6, 10);
  EXPECT_TRUE(neg.feasible(1));
  EXPECT_FALSE(neg.feasible(10));
}

TEST(MinJumps, ConstantData) {
  const std::vector<double> y(30, 2.0);
  const auto fam = ExpFamily::gauss_mean();
  for (double q : {-std::sqrt(2.0) + 1e-9, 0.0, 1.0, 3.0}) {
    const StepFit f = fit_smuce(y, fam, q);
    EXPECT_EQ(f.k_hat, 0u) << q;
    EXPECT_NEAR(f.values_mean[0], 2.0, 1e-15);
  }
}

TEST(MinJumps, TwoLevelExample) {
  const std::vector<double> y{0, 0, 5, 5};
  const auto fam = ExpFamily::gauss_mean();
  EXPECT_EQ(min_jumps(y, fam, 1.0).k_hat, 1u);
  const StepFit f = fit_smuce(y, fam, 1.0);
  ASSERT_EQ(f.step.boundaries, (std::vector<std::size_t>{0, 2}));
  EXPECT_NEAR(f.values_mean[0], 0.0, 1e-15);
  EXPECT_NEAR(f.values_mean[1], 5.0, 1e-15);
  const auto ex = oracle::gauss_exhaustive(y, 1.0, 1.0);
  EXPECT_EQ(ex.k_min, 1u);
  EXPECT_EQ(ex.best_starts, f.step.boundaries);
}

TEST(MinJumps, ExhaustiveOracle) {
  std::mt19937_64 g(2024);
  const auto fam = ExpFamily::gauss_mean();
  for (int it = 0; it < 200; ++it) {
    const std::size_t n = 4 + g() % 9;
    auto y = oracle::normal_data(g, n);
    for (std::size_t i = n / 2; i < n; ++i) y[i] += (g() % 3) * 1.5;
    const double q = std::vector<double>{0.5, 1.0, 2.0}[g() % 3];
    const auto ex = oracle::gauss_exhaustive(y, q, 1.0);
    const StepFit f = fit_smuce(y, fam, q);
    ASSERT_EQ(f.k_hat, ex.k_min) << it;
    EXPECT_NEAR(f.loglik, ex.best_loglik, 1e-9) << it;
    EXPECT_LE(oracle::gauss_stat(y, f.step.boundaries, f.values_mean, 1.0), q + 1e-9);
  }
}

TEST(FitSmuce, GammaPenalisedEquivalence) {
  std::mt19937_64 g(77);
  const auto fam = ExpFamily::gauss_mean();
  for (int it = 0; it < 30; ++it) {
    const std::size_t n = 5 + g() % 30;
    auto y = oracle::normal_data(g, n);
    for (std::size_t i = n / 3; i < n; ++i) y[i] += 2.0;
    const double q = 0.5 + (g() % 4) * 0.5;
    const StepFit f = fit_smuce(y, fam, q);
    EXPECT_EQ(f.step.boundaries, oracle::gamma_dp(y, q, 1.0, oracle::safe_gamma(y, q, 1.0))) << it;
  }
}

TEST(FitSmuce, Invariants) {
  std::mt19937_64 g(5);
  const auto fam = ExpFamily::gauss_mean(0.7);
  for (int it = 0; it < 60; ++it) {
    const std::size_t n = 20 + g() % 100;
    auto y = oracle::normal_data(g, n, 0.7);
    for (std::size_t i = n / 4; i < n / 2; ++i) y[i] += 1.0;
    const double q = (g() % 5) * 0.5;
    const StepFit f = fit_smuce(y, fam, q);
    EXPECT_LE(f.achieved_stat, q + 1e-9);
    EXPECT_NEAR(f.achieved_stat, multiscale_stat(y, fam, f.step), 1e-12);
    EXPECT_EQ(f.k_hat, f.step.jumps());
    EXPECT_NEAR(f.loglik, -step_cost(y, fam, f.step), 1e-9 * std::max(1.0, std::abs(f.loglik)));
    for (std::size_t k = 0; k < f.step.segments(); ++k) {
      EXPECT_TRUE(f.segment_bounds[k].contains(f.step.values[k]));
      // value optimality within the bounds
      for (double eps : {-1e-4, 1e-4}) {
        StepFunction s = f.step;
        s.values[k] = f.segment_bounds[k].clamp(s.values[k] + eps);
        EXPECT_GE(step_cost(y, fam, s), step_cost(y, fam, f.step) - 1e-12);
      }
    }
    const auto& J = f.prefix_jumps;
    EXPECT_EQ(J[0], 0u);
    for (std::size_t p = 1; p < n; ++p) {
      EXPECT_GE(J[p], J[p - 1]);
      EXPECT_LE(J[p], J[p - 1] + 1);
    }
    EXPECT_EQ(J.back(), f.k_hat);
    EXPECT_EQ(f.suffix_jumps[0], f.k_hat);
  }
}

TEST(FitSmuce, MonotoneInQ) {
  std::mt19937_64 g(8);
  const auto fam = ExpFamily::gauss_mean();
  for (int it = 0; it < 20; ++it) {
    auto y = oracle::normal_data(g, 80);
    for (std::size_t i = 30; i < 50; ++i) y[i] += 1.2;
    std::size_t prev = 80;
    for (double q = -1.0; q <= 4.0; q += 0.25) {
      const std::size_t k = min_jumps(y, fam, q).k_hat;
      EXPECT_LE(k, prev);
      prev = k;
    }
  }
}

TEST(FitSmuce, NestedInfeasibility) {
  std::mt19937_64 g(13);
  const auto fam = ExpFamily::gauss_mean();
  auto y = oracle::normal_data(g, 50);
  for (std::size_t i = 25; i < 50; ++i) y[i] += 3.0;
  ExpFamModel model(y, fam);
  const ThresholdTable thr(0.5, 50);
  FeasibleBounds<ExpFamModel> fb(model, thr);
  for (std::size_t p = 0; p < 50; ++p) {
    const std::size_t rmin = fb.advance();
    for (std::size_t r = rmin; r <= p; ++r) {
      const auto s = oracle::segment_set([&](std::size_t i, std::size_t j) { return oracle::gauss_interval(y, i, j, 0.5, 1.0); },
                                         r, p);
      EXPECT_NEAR(fb.bound(r).lower, s.lower, 1e-12);
      EXPECT_NEAR(fb.bound(r).upper, s.upper, 1e-12);
    }
    if (rmin > 0) {
      const auto s = oracle::segment_set([&](std::size_t i, std::size_t j) { return oracle::gauss_interval(y, i, j, 0.5, 1.0); },
                                         rmin - 1, p);
      EXPECT_TRUE(s.empty());
    }
  }
}

TEST(FitSmuce, OtherFamilies) {
  std::mt19937_64 g(21);
  // Poisson with zero counts
  {
    std::vector<double> y(60, 0.0);
    std::poisson_distribution<int> P(6.0);
    for (std::size_t i = 30; i < 60; ++i) y[i] = P(g);
    const StepFit f = fit_smuce(y, ExpFamily::poisson(), 1.0);
    EXPECT_EQ(f.k_hat, 1u);
    EXPECT_EQ(f.step.values[0], -kInf);
    EXPECT_EQ(f.values_mean[0], 0.0);
    EXPECT_LE(f.achieved_stat, 1.0 + 1e-9);
  }
  // Bernoulli
  {
    std::vector<double> y(100);
    std::bernoulli_distribution A(0.1), B(0.9);
    for (std::size_t i = 0; i < 100; ++i) y[i] = i < 50 ? A(g) : B(g);
    const StepFit f = fit_smuce(y, ExpFamily::bernoulli(), 1.0);
    EXPECT_EQ(f.k_hat, 1u);
    // best over all feasible single splits with free means
    const auto bern = ExpFamily::bernoulli();
    double best = -kInf;
    for (std::size_t s = 1; s < 100; ++s) {
      double m0 = 0, m1 = 0;
      for (std::size_t i = 0; i < 100; ++i) (i < s ? m0 : m1) += y[i];
      m0 /= s;
      m1 /= 100 - s;
      const StepFunction st{100, {0, s}, {bern.natural_extended(m0), bern.natural_extended(m1)}};
      if (multiscale_stat(y, bern, st) <= 1.0) best = std::max(best, -step_cost(y, bern, st));
    }
    EXPECT_GE(f.loglik, best - 1e-9);
    EXPECT_NEAR(static_cast<double>(f.step.boundaries[1]), 50.0, 15.0);
  }
  // Gaussian variance on squares
  {
    std::vector<double> y(200);
    std::normal_distribution<double> N(0.0, 1.0);
    for (std::size_t i = 0; i < 200; ++i) {
      const double z = N(g) * (i < 100 ? 1.0 : 3.0);
      y[i] = z * z;
    }
    const StepFit f = fit_smuce(y, ExpFamily::gauss_variance(), 1.0);
    EXPECT_EQ(f.k_hat, 1u);
    EXPECT_NEAR(f.values_mean[1], 9.0, 3.0);
  }
  EXPECT_THROW(fit_smuce(std::vector<double>{1.0, -1.0}, ExpFamily::poisson(), 1.0), DomainError);
  EXPECT_THROW(fit_smuce(std::vector<double>{1.5, 1.0}, ExpFamily::bernoulli(), 1.0), DomainError);
}

TEST(FitSmuce, InfeasibleThreshold) {
  const std::vector<double> y{0, 1, 2};
  try {
    fit_smuce(y, ExpFamily::gauss_mean(), -10.0);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_NEAR(e.min_attainable(), -penalty(1, 3), 1e-12);
    EXPECT_NE(std::string(e.what()).find("smallest attainable"), std::string::npos);
  }
  // between -pen(1, n) and -sqrt(2) only short segments are allowed
  const StepFit f = fit_smuce(y, ExpFamily::gauss_mean(), -1.6);
  EXPECT_GE(f.k_hat, 1u);
}

TEST(FitSmuce, MinScaleAndMovingAverage) {
  std::mt19937_64 g(31);
  auto y = oracle::normal_data(g, 120);
  for (std::size_t i = 60; i < 120; ++i) y[i] += 2.0;
  FitOptions opt;
  opt.min_scale = 0.05;
  const StepFit f = fit_smuce(y, ExpFamily::gauss_mean(), 1.0, opt);
  EXPECT_LE(multiscale_stat(y, ExpFamily::gauss_mean(), f.step, 0.05), 1.0 + 1e-9);
  EXPECT_LE(f.k_hat, fit_smuce(y, ExpFamily::gauss_mean(), 1.0).k_hat);
  const StepFit m = fit_smuce(y, ExpFamily::gauss_mean(1.0, 0.4), 1.0);
  EXPECT_LE(m.achieved_stat, 1.0 + 1e-9);
  FitOptions ll;
  ll.mode = PenaltyMode::loglog;
  const StepFit l = fit_smuce(y, ExpFamily::gauss_mean(), 2.0, ll);
  EXPECT_LE(multiscale_stat(y, ExpFamily::gauss_mean(), l.step, 0.0, PenaltyMode::loglog), 2.0 + 1e-9);
}
