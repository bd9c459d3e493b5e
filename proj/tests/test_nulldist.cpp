#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include <unistd.h>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smuce/nulldist.hpp"
#include "smuce/rng.hpp"

using namespace smuce;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("smuce-test-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Rng, Deterministic) {
  StreamRng a(42, 3), b(42, 3), c(42, 4);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
  StreamRng u(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double v = u.uniform();
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(Rng, NormalQuantile) {
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-9);
  for (double p : {0.001, 0.1, 0.3, 0.7, 0.99}) {
    const double z = normal_quantile(p);
    EXPECT_NEAR(0.5 * std::erfc(-z / std::numbers::sqrt2), p, 1e-14);
  }
}

TEST(Rng, MomentsOfVariates) {
  StreamRng r(9, 1);
  const int N = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < N; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / N, 0.0, 0.01);
  EXPECT_NEAR(s2 / N, 1.0, 0.015);
  for (double mu : {0.3, 4.0, 25.0, 300.0}) {
    double m = 0, v = 0;
    const int M = 100000;
    for (int i = 0; i < M; ++i) {
      const double k = static_cast<double>(poisson_variate(r, mu));
      m += k;
      v += k * k;
    }
    m /= M;
    v = v / M - m * m;
    EXPECT_NEAR(m, mu, 5 * std::sqrt(mu / M)) << mu;
    EXPECT_NEAR(v / mu, 1.0, 0.03) << mu;
  }
}

TEST(NullTable, QuantileAndSurvival) {
  NullTable t{4, 4, 0, 0.0, PenaltyMode::sqrt, {1, 2, 3, 4}};
  EXPECT_EQ(t.quantile(0.5), 2.0);
  EXPECT_EQ(t.quantile(0.26), 2.0);
  EXPECT_EQ(t.quantile(0.25), 1.0);
  EXPECT_EQ(t.quantile(0.99), 4.0);
  EXPECT_EQ(t.survival(0.0), 1.0);
  EXPECT_EQ(t.survival(5.0), 0.0);
  EXPECT_EQ(t.survival(2.0), 0.75);
  EXPECT_THROW(t.quantile(1.0), std::invalid_argument);
  NullTable e;
  EXPECT_THROW(e.quantile(0.5), std::invalid_argument);
  EXPECT_THROW(e.survival(0.5), std::invalid_argument);
}

TEST(SimulateNull, TwoPointEnumeration) {
  const auto t = simulate_null(2, 1, 77);
  ASSERT_EQ(t.samples.size(), 1u);
  StreamRng rng(77, 0);
  const double z1 = rng.normal(), z2 = rng.normal();
  const double v = std::max({std::abs(z1) - oracle::pen(1, 2), std::abs(z2) - oracle::pen(1, 2),
                             std::abs(z1 + z2) / std::sqrt(2.0) - oracle::pen(2, 2)});
  EXPECT_NEAR(t.samples[0], v, 1e-14);
}

TEST(SimulateNull, MatchesDirectStatistic) {
  const std::size_t n = 25;
  const auto t = simulate_null(n, 50, 5);
  std::vector<double> direct;
  for (std::size_t r = 0; r < 50; ++r) {
    StreamRng rng(5, r);
    std::vector<double> z(n);
    for (auto& v : z) v = rng.normal();
    direct.push_back(oracle::gauss_stat(z, {0}, {0.0}, 1.0));
  }
  std::sort(direct.begin(), direct.end());
  for (std::size_t r = 0; r < 50; ++r) EXPECT_NEAR(t.samples[r], direct[r], 1e-12);
}

TEST(SimulateNull, PropertiesAndDeterminism) {
  const std::size_t n = 40;
  NullOptions one;
  one.threads = 1;
  NullOptions four;
  four.threads = 4;
  const auto a = simulate_null(n, 5000, 3, 0.0, PenaltyMode::sqrt, one);
  const auto b = simulate_null(n, 5000, 3, 0.0, PenaltyMode::sqrt, four);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::is_sorted(a.samples.begin(), a.samples.end()));
  EXPECT_GE(a.samples.front(), -penalty(1, n));
  EXPECT_LT(a.samples.front(), 0.0);  // negative support at small n
  double prev = -kInf;
  for (double lvl = 0.05; lvl < 1.0; lvl += 0.05) {
    const double q = a.quantile(lvl);
    EXPECT_GE(q, prev);
    prev = q;
    const double alpha = 1.0 - lvl;
    EXPECT_LE(a.survival(q), alpha + 1.0 / 5000 + 1e-12);
    EXPECT_GE(a.survival(q), alpha - 1.0 / 5000 - 1e-12);
  }
  const auto c = simulate_null(n, 100, 4);
  EXPECT_NE(c.samples, simulate_null(n, 100, 3).samples);
}

TEST(SimulateNull, MinScaleAndModes) {
  const auto full = simulate_null(30, 200, 8);
  const auto restricted = simulate_null(30, 200, 8, 0.2);
  for (std::size_t i = 0; i < 200; ++i) EXPECT_LE(restricted.samples[i], full.samples[i] + 1e-12);
  const auto ll = simulate_null(30, 50, 8, 0.0, PenaltyMode::loglog);
  EXPECT_EQ(ll.mode, PenaltyMode::loglog);
  const auto unc = simulate_null(30, 50, 8, 0.0, PenaltyMode::uncalibrated);
  EXPECT_GT(unc.samples.front(), 0.0);
}

TEST(SimulateNull, Errors) {
  EXPECT_THROW(simulate_null(1, 10, 1), std::invalid_argument);
  EXPECT_THROW(simulate_null(10, 0, 1), std::invalid_argument);
  NullOptions small;
  small.compute_budget = 1000;
  EXPECT_THROW(simulate_null(100, 10, 1, 0.0, PenaltyMode::sqrt, small), ResourceError);
  small.allow_large = true;
  EXPECT_NO_THROW(simulate_null(100, 10, 1, 0.0, PenaltyMode::sqrt, small));
}

TEST(SimulateNull, FamilySpecific) {
  const auto t = simulate_null_family(ExpFamily::poisson(), std::log(3.0), 30, 200, 2);
  EXPECT_EQ(t.samples.size(), 200u);
  EXPECT_TRUE(std::is_sorted(t.samples.begin(), t.samples.end()));
  EXPECT_EQ(t, simulate_null_family(ExpFamily::poisson(), std::log(3.0), 30, 200, 2));
  EXPECT_THROW(simulate_null_family(ExpFamily::gauss_variance(), 1.0, 30, 10, 2), DomainError);
  // Gaussian family at theta 0 reproduces the generic table
  EXPECT_EQ(simulate_null_family(ExpFamily::gauss_mean(), 0.0, 20, 30, 6).samples.size(), 30u);
  const auto g = simulate_null_family(ExpFamily::gauss_mean(), 0.0, 20, 30, 6);
  const auto h = simulate_null(20, 30, 6);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(g.samples[i], h.samples[i], 1e-12);
}

TEST(NullFile, RoundTripAndCache) {
  const auto dir = temp_dir("null");
  const auto t = simulate_null(20, 100, 11, 0.1);
  const auto p = dir / "t.txt";
  write_null_table(t, p);
  EXPECT_EQ(read_null_table(p), t);
  write_null_table(t, dir / "u.txt");
  std::ifstream a(p), b(dir / "u.txt");
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.substr(0, sa.find('\n')), "smuce-null v1,n=20,reps=100,seed=11,min_scale=0.10000000000000001,mode=sqrt");

  const auto c1 = cached_null(20, 100, 11, 0.1, PenaltyMode::sqrt, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / null_cache_name(20, 100, 11, 0.1, PenaltyMode::sqrt)));
  EXPECT_EQ(c1, t);
  EXPECT_EQ(cached_null(20, 100, 11, 0.1, PenaltyMode::sqrt, dir), t);
  EXPECT_EQ(cached_null(20, 100, 11, 0.1, PenaltyMode::sqrt, std::nullopt), t);

  {
    std::ofstream bad(dir / "bad.txt");
    bad << "smuce-null v1,n=20,reps=2,seed=1,min_scale=0,mode=sqrt\n1.0\nabc\n";
  }
  try {
    read_null_table(dir / "bad.txt");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  {
    std::ofstream bad(dir / "short.txt");
    bad << "smuce-null v1,n=20,reps=3,seed=1,min_scale=0,mode=sqrt\n1.0\n2.0\n";
  }
  EXPECT_THROW(read_null_table(dir / "short.txt"), IoError);
  EXPECT_THROW(read_null_table(dir / "missing.txt"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(NullDefaults, Sizes) {
  EXPECT_EQ(default_null_size(497), 497u);
  EXPECT_EQ(default_null_size(10000), 3000u);
  EXPECT_EQ(kDefaultNullReps, 5000u);
}
