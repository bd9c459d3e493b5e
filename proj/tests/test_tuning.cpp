#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smuce/tuning.hpp"

using namespace smuce;

TEST(BetaBound, Examples) {
  EXPECT_LT(beta_bound(1.0, 1e6, 0.1), 1e-300);
  // positive part clamps at zero so the first summand is 2 / lambda
  EXPECT_GE(beta_bound_raw(1.0, 1.0, 0.2), 2.0 / 0.2);
  EXPECT_EQ(beta_bound(1.0, 1.0, 0.2), 1.0);
  EXPECT_NEAR(beta_bound_raw(1.0, 40.0, 0.1), oracle::beta_bound(1.0, 40.0, 0.1), 1e-12);
  EXPECT_THROW(beta_bound(1.0, 0.0, 0.1), std::invalid_argument);
  EXPECT_THROW(beta_bound(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST(BetaBound, RefinedVersusGeneric) {
  // with a = eta / (2 sqrt 2) and s = q + sqrt(2 log(2e / lambda)) the first
  // terms differ by exp(((a + s)^2 - 6 s^2) / 8); the generic second term is
  // always the smaller one, so for strong signals the generic bound wins
  const auto g = ExpFamily::gauss_mean();
  int weak = 0, strong = 0;
  for (double q : {-0.5, 0.0, 1.0, 2.0})
    for (double lambda : {0.05, 0.1, 0.25, 0.5})
      for (double delta : {0.5, 1.0, 2.0, 4.0})
        for (std::size_t n : {100u, 1000u, 10000u}) {
          const std::size_t K = 3;
          const double eta = std::sqrt(n * lambda) * delta;
          const double a = eta / (2.0 * std::sqrt(2.0));
          const double s = q + std::sqrt(2.0 * std::log(2.0 * std::exp(1.0) / lambda));
          const SignalPrior prior{lambda, delta, -1.0, 1.0};
          if (a <= s) {
            ++weak;
            EXPECT_LE(gaussian_underestimation_bound(q, n, lambda, delta, K), underestimation_bound(q, n, prior, K, g));
          } else if ((a + s) * (a + s) > 6.0 * s * s) {
            ++strong;
            const double refined = gaussian_underestimation_bound_raw(q, n, lambda, delta, K);
            const double generic = underestimation_bound_raw(q, n, prior, K, g);
            if (refined > 0.0) {
              EXPECT_GT(refined, generic) << q << " " << lambda << " " << delta << " " << n;
            }
            const double log_first_r = -(a - s) * (a - s) / 8.0;
            const double log_first_g = 0.5 * s * s - a * a / 4.0;
            EXPECT_NEAR(log_first_r - log_first_g, ((a + s) * (a + s) - 6.0 * s * s) / 8.0,
                        1e-9 * std::max(1.0, a * a));
          }
        }
  EXPECT_GT(weak, 10);
  EXPECT_GT(strong, 10);
}

TEST(LambdaStar, Examples) {
  for (std::size_t n : {100u, 500u, 5000u}) {
    const auto ls = solve_lambda_star(n);
    EXPECT_NEAR(std::sqrt(static_cast<double>(n)) * ls.lambda - 12.0 * std::sqrt(-std::log(ls.lambda)), 0.0, 1e-8);
    EXPECT_NEAR(ls.eta, 12.0 * std::sqrt(-std::log(ls.lambda)), 1e-12);
  }
  EXPECT_NEAR(solve_lambda_star(500).lambda, 0.468, 5e-4);
  EXPECT_GT(solve_lambda_star(100).lambda, solve_lambda_star(1000).lambda);
  EXPECT_GT(solve_lambda_star(1000).lambda, solve_lambda_star(10000).lambda);
  EXPECT_THROW(solve_lambda_star(1), std::invalid_argument);
}

TEST(ChooseQ, SingleSampleTable) {
  NullTable t{10, 1, 0, 0.0, PenaltyMode::sqrt, {0.7}};
  const QChoice c = choose_q(t, 0.2, 30.0);
  EXPECT_EQ(c.q, 0.7);
  EXPECT_EQ(c.alpha, 1.0);
  EXPECT_DOUBLE_EQ(c.objective, 1.0 - c.alpha - c.beta);
}

TEST(ChooseQ, GridArgmax) {
  const auto t = simulate_null(60, 2000, 1);
  const double lambda = 0.2, eta = 25.0;
  const QChoice c = choose_q(t, lambda, eta);
  EXPECT_EQ(c.objective, 1.0 - c.alpha - c.beta);
  EXPECT_LE(c.objective, 1.0);
  for (double d : {-0.01, 0.01}) {
    const double q = c.q + d;
    const double obj = 1.0 - t.survival(q) - beta_bound_raw(q, eta, lambda);
    EXPECT_LE(obj, c.objective + 1e-12);
  }
  // at least as good as every point of a fine scan over the positive part
  for (double q = std::max(0.0, t.samples.front()); q <= t.samples.back(); q += 0.003) {
    const double obj = 1.0 - t.survival(q) - beta_bound_raw(q, eta, lambda);
    EXPECT_LE(obj, c.objective + 5e-3) << q;
  }
  const QChoice d = choose_q(60, t);
  EXPECT_NEAR(d.lambda, solve_lambda_star(60).lambda, 1e-15);
}

TEST(FamilyConstant, PaperValues) {
  EXPECT_EQ(family_constant(ExpFamily::gauss_mean(), {0.1, 1.0, -3.0, 3.0}), 1.0 / 32.0);
  EXPECT_NEAR(family_constant(ExpFamily::poisson(), {0.1, 1.0, 0.0, std::log(4.0)}), 1.0 / 128.0, 1e-15);
  const double c = family_constant(ExpFamily::bernoulli(), {0.1, 1.0, -1.0, 2.0});
  const double v = ExpFamily::bernoulli().variance(2.0);
  EXPECT_NEAR(c, v * v / (32.0 * 0.25), 1e-15);
}

TEST(Bounds, MatchIndependentEvaluator) {
  const auto g = ExpFamily::gauss_mean();
  const auto p = ExpFamily::poisson();
  int count = 0;
  for (double q : {-0.5, 0.5, 1.5, 3.0})
    for (double lambda : {0.02, 0.1, 0.3, 0.5})
      for (double delta : {0.2, 0.8, 2.0})
        for (std::size_t n : {50u, 500u, 5000u}) {
          const SignalPrior pr{lambda, delta, 0.0, std::log(4.0)};
          for (const auto* fam : {&g, &p}) {
            const double C = family_constant(*fam, pr);
            EXPECT_NEAR(underestimation_bound_raw(q, n, pr, 4, *fam),
                        oracle::generic_bound(q, double(n), lambda, delta, 4.0, C),
                        1e-12 * std::max(1.0, oracle::generic_bound(q, double(n), lambda, delta, 4.0, C)));
            EXPECT_NEAR(location_error_bound_raw(q, n, lambda, pr, 4, *fam),
                        oracle::location_bound(q, double(n), lambda, delta, 4.0, C),
                        1e-12 * std::max(1.0, oracle::location_bound(q, double(n), lambda, delta, 4.0, C)));
            ++count;
          }
          EXPECT_NEAR(beta_bound_raw(q, std::sqrt(n * lambda) * delta, lambda),
                      oracle::beta_bound(q, std::sqrt(n * lambda) * delta, lambda), 1e-12 * 2.0 / lambda);
        }
  EXPECT_EQ(count, 288);
}

TEST(Bounds, LimitsAndCaps) {
  const auto g = ExpFamily::gauss_mean();
  EXPECT_LT(underestimation_bound(1.0, 500, {0.1, 1e3, -1, 1}, 3, g), 1e-300);
  EXPECT_LE(underestimation_bound(5.0, 50, {0.1, 0.1, -1, 1}, 3, g), 1.0);
  EXPECT_LT(location_error_bound(1.0, 500, 1.0, {0.1, 3.0, -1, 1}, 3, g), 1e-30);
  double prev = kInf;
  for (double c = 0.01; c <= 1.0; c += 0.01) {
    const double b = location_error_bound(0.5, 2000, c, {0.1, 1.0, -1, 1}, 3, g);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, prev + 1e-15);
    prev = b;
  }
  EXPECT_THROW(location_error_bound(1.0, 100, 0.0, {0.1, 1.0, -1, 1}, 1, g), std::invalid_argument);
  EXPECT_THROW(underestimation_bound(1.0, 100, {0.0, 1.0, -1, 1}, 1, g), std::invalid_argument);
}
