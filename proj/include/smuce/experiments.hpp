#pragma once

// Seeded simulation scenarios and their summary statistics.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smuce/confidence.hpp"
#include "smuce/expfam.hpp"
#include "smuce/nulldist.hpp"
#include "smuce/rng.hpp"
#include "smuce/segdp.hpp"

namespace smuce {

/// A data-generating step function plus the fitting protocol. `truth`
/// values are in mean space: means for the Gaussian mean family, variances
/// for the Gaussian variance family, intensities, success probabilities.
struct Scenario {
  std::string name;
  std::string note;
  FamilyKind family = FamilyKind::gauss_mean;
  StepFunction truth;
  double noise_sd = 1.0;   // Gaussian mean data only
  double model_sigma = 1.0;
  double trend_a = 0.0;    // adds 0.25 b sin(a pi i), i = 1..n
  double trend_b = 0.0;
  double level = 0.9;      // q is the level-quantile of the null table
  std::size_t reps = 500;
  std::uint64_t seed = 1;
  std::size_t null_reps = kDefaultNullReps;
  std::uint64_t null_seed = 20240601;
  bool stand_in = false;   // signal approximates one only shown graphically

  ExpFamily model_family() const {
    switch (family) {
      case FamilyKind::gauss_mean: return ExpFamily::gauss_mean(model_sigma);
      case FamilyKind::gauss_variance: return ExpFamily::gauss_variance();
      case FamilyKind::poisson: return ExpFamily::poisson();
      case FamilyKind::bernoulli: return ExpFamily::bernoulli();
    }
    return ExpFamily::gauss_mean();
  }
};

/// Noiseless signal (with trend) on the grid, in mean space.
inline std::vector<double> scenario_signal(const Scenario& s) {
  std::vector<double> mu = s.truth.expand();
  if (s.trend_b != 0.0)
    for (std::size_t i = 0; i < mu.size(); ++i)
      mu[i] += 0.25 * s.trend_b * std::sin(s.trend_a * std::numbers::pi * static_cast<double>(i + 1));
  return mu;
}

/// Replicate r of the scenario's data, as sufficient statistics (squares
/// for the Gaussian variance family).
inline std::vector<double> scenario_data(const Scenario& s, std::size_t r) {
  StreamRng rng(s.seed, r);
  const std::vector<double> mu = scenario_signal(s);
  std::vector<double> y(mu.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    switch (s.family) {
      case FamilyKind::gauss_mean: y[i] = mu[i] + s.noise_sd * rng.normal(); break;
      case FamilyKind::gauss_variance: {
        const double v = std::sqrt(mu[i]) * rng.normal();
        y[i] = v * v;
        break;
      }
      case FamilyKind::poisson: y[i] = static_cast<double>(poisson_variate(rng, mu[i])); break;
      case FamilyKind::bernoulli: y[i] = rng.uniform() < mu[i] ? 1.0 : 0.0; break;
    }
  }
  return y;
}

struct ReplicateResult {
  std::ptrdiff_t k_diff = 0;
  double mse = 0.0;
  double mae = 0.0;
  bool k_correct = false;
  bool intervals_cover = false;
  bool band_covers = false;
};

struct ScenarioReport {
  std::string name;
  std::size_t n = 0;
  std::size_t K = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  double level = 0.0;
  double q = 0.0;
  bool stand_in = false;
  std::map<std::ptrdiff_t, double> k_diff_freq;  // K_hat - K
  double mise = 0.0;
  double miae = 0.0;
  double coverage = 0.0;              // K_hat = K, jumps in intervals, truth in band
  double freq_k_correct = 0.0;
  double coverage_given_k = 0.0;      // intervals and band, given K_hat = K
  double freq_k_at_least = 0.0;       // K_hat >= K
  double freq_detect = 0.0;           // K_hat >= 1
};

/// Fits one replicate and scores it against the step truth.
inline ReplicateResult evaluate_replicate(const Scenario& s, const std::vector<double>& y, double q) {
  const ExpFamily fam = s.model_family();
  const StepFit fit = fit_smuce(y, fam, q);
  const std::vector<double> truth = s.truth.expand();
  ReplicateResult res;
  res.k_diff = static_cast<std::ptrdiff_t>(fit.k_hat) - static_cast<std::ptrdiff_t>(s.truth.jumps());
  std::vector<double> est(fit.step.n);
  for (std::size_t k = 0; k < fit.step.segments(); ++k)
    for (std::size_t i = fit.step.segment_begin(k); i < fit.step.segment_end(k); ++i) est[i] = fit.values_mean[k];
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double d = est[i] - truth[i];
    res.mse += d * d;
    res.mae += std::abs(d);
  }
  res.mse /= static_cast<double>(est.size());
  res.mae /= static_cast<double>(est.size());
  res.k_correct = res.k_diff == 0;
  if (res.k_correct) {
    const ConfidenceRegion region = confidence_region(y, fam, fit);
    res.intervals_cover = true;
    for (std::size_t k = 0; k < region.jump_intervals.size(); ++k) {
      const std::size_t tau = s.truth.boundaries[k + 1];
      if (tau < region.jump_intervals[k].left || tau > region.jump_intervals[k].right) res.intervals_cover = false;
    }
    res.band_covers = true;
    const double tol = 1e-12;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const ValueInterval& b = region.band[i];
      if (!(truth[i] >= b.lower - tol * std::abs(b.lower) && truth[i] <= b.upper + tol * std::abs(b.upper)))
        res.band_covers = false;
    }
  }
  return res;
}

inline ScenarioReport summarize(const Scenario& s, double q, const std::vector<ReplicateResult>& rs) {
  ScenarioReport rep;
  rep.name = s.name;
  rep.n = s.truth.n;
  rep.K = s.truth.jumps();
  rep.reps = rs.size();
  rep.seed = s.seed;
  rep.level = s.level;
  rep.q = q;
  rep.stand_in = s.stand_in;
  std::size_t correct = 0, cover = 0, cover_given = 0, at_least = 0, detect = 0;
  for (const auto& r : rs) {
    rep.k_diff_freq[r.k_diff] += 1.0;
    rep.mise += r.mse;
    rep.miae += r.mae;
    if (r.k_correct) {
      ++correct;
      if (r.intervals_cover && r.band_covers) {
        ++cover;
        ++cover_given;
      }
    }
    if (r.k_diff >= 0) ++at_least;
    if (static_cast<std::ptrdiff_t>(rep.K) + r.k_diff >= 1) ++detect;
  }
  const double R = static_cast<double>(rs.size());
  for (auto& [k, v] : rep.k_diff_freq) v /= R;
  rep.mise /= R;
  rep.miae /= R;
  rep.coverage = static_cast<double>(cover) / R;
  rep.freq_k_correct = static_cast<double>(correct) / R;
  rep.coverage_given_k = correct > 0 ? static_cast<double>(cover_given) / static_cast<double>(correct) : 0.0;
  rep.freq_k_at_least = static_cast<double>(at_least) / R;
  rep.freq_detect = static_cast<double>(detect) / R;
  return rep;
}

/// Threshold used by the scenario: level-quantile of the Gaussian null
/// table at min(n, 3000), read from or stored in `cache_dir` when given.
inline double scenario_q(const Scenario& s, const std::optional<std::filesystem::path>& cache_dir,
                         const NullOptions& opt = {}) {
  const NullTable t = cached_null(default_null_size(s.truth.n), s.null_reps, s.null_seed, 0.0, PenaltyMode::sqrt,
                                  cache_dir, opt);
  return t.quantile(s.level);
}

/// Runs all replicates. Replicate r depends only on (seed, r).
inline ScenarioReport run_scenario(const Scenario& s, double q, unsigned threads = 0) {
  s.truth.validate();
  std::vector<ReplicateResult> rs(s.reps);
  detail::parallel_for(s.reps, detail::resolve_threads(threads, s.reps),
                       [&](std::size_t r) { rs[r] = evaluate_replicate(s, scenario_data(s, r), q); });
  return summarize(s, q, rs);
}

inline ScenarioReport run_scenario(const Scenario& s, const std::optional<std::filesystem::path>& cache_dir,
                                   unsigned threads = 0) {
  NullOptions opt;
  opt.threads = threads;
  return run_scenario(s, scenario_q(s, cache_dir, opt), threads);
}

namespace detail {

inline StepFunction steps(std::size_t n, std::vector<std::size_t> starts, std::vector<double> values) {
  StepFunction f{n, std::move(starts), std::move(values)};
  f.validate();
  return f;
}

inline StepFunction equidistant(std::size_t n, std::size_t k, double a, double b) {
  StepFunction f;
  f.n = n;
  for (std::size_t j = 0; j <= k; ++j) {
    f.boundaries.push_back(j * n / (k + 1));
    f.values.push_back(j % 2 == 0 ? a : b);
  }
  return f;
}

inline Scenario table1(std::string name, double sigma, double a, double b, double level) {
  Scenario s;
  s.name = std::move(name);
  s.note = "n = 497 signal with 6 jumps";
  s.family = FamilyKind::gauss_mean;
  s.truth = steps(497, {0, 137, 224, 241, 298, 307, 331}, {-0.18, 0.08, 1.07, -0.53, 0.16, -0.69, -0.16});
  s.noise_sd = sigma;
  s.model_sigma = sigma;
  s.trend_a = a;
  s.trend_b = b;
  s.level = level;
  return s;
}

}  // namespace detail

/// Built-in scenarios.
inline std::vector<Scenario> scenario_registry() {
  std::vector<Scenario> out;
  out.push_back(detail::table1("table1-gauss-s0.1", 0.1, 0.0, 0.0, 0.55));
  out.push_back(detail::table1("table1-gauss-s0.2", 0.2, 0.0, 0.0, 0.55));
  out.push_back(detail::table1("table1-gauss-s0.2-long-trend", 0.2, 0.01, 0.1, 0.55));
  out.push_back(detail::table1("table1-gauss-s0.2-short-trend", 0.2, 0.025, 0.1, 0.55));
  out.push_back(detail::table1("table1-gauss-s0.3", 0.3, 0.0, 0.0, 0.55));
  out.push_back(detail::table1("table1-gauss-s0.3-level0.4", 0.3, 0.0, 0.0, 0.4));

  const std::vector<std::size_t> cov_starts{0, 300, 700, 1000, 1400, 1700};
  {
    Scenario s;
    s.name = "coverage-gauss-mean";
    s.note = "parametric stand-in, n = 2000, 5 jumps";
    s.family = FamilyKind::gauss_mean;
    s.truth = detail::steps(2000, cov_starts, {0.0, 1.5, 0.0, 1.0, -0.5, 0.5});
    s.stand_in = true;
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "coverage-gauss-variance";
    s.note = "parametric stand-in, n = 2000, 5 jumps, variances";
    s.family = FamilyKind::gauss_variance;
    s.truth = detail::steps(2000, cov_starts, {1.0, 4.0, 1.0, 2.25, 0.5, 1.5});
    s.stand_in = true;
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "coverage-poisson";
    s.note = "parametric stand-in, n = 2000, 5 jumps, intensities";
    s.family = FamilyKind::poisson;
    s.truth = detail::steps(2000, cov_starts, {2.0, 5.0, 2.0, 8.0, 4.0, 1.0});
    s.stand_in = true;
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "coverage-bernoulli";
    s.note = "parametric stand-in, n = 2000, 5 jumps, probabilities";
    s.family = FamilyKind::bernoulli;
    s.truth = detail::steps(2000, cov_starts, {0.2, 0.7, 0.3, 0.8, 0.4, 0.1});
    s.stand_in = true;
    out.push_back(s);
  }
  const std::vector<std::pair<std::size_t, double>> var_k{{0, 1.0}, {1, 2.0}, {4, 2.0}, {9, 2.5}, {19, 3.5}};
  for (const auto& [k, hi] : var_k) {
    Scenario s;
    s.name = "variance-k" + std::to_string(k);
    s.note = "equidistant jumps, standard deviation alternating from 1; n = 1000 stand-in";
    s.family = FamilyKind::gauss_variance;
    s.truth = detail::equidistant(1000, k, 1.0, hi * hi);
    s.reps = 1000;
    s.stand_in = true;
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "poisson-lowcount";
    s.note = "synthetic stand-in, n = 1000, 7 jumps, low intensities";
    s.family = FamilyKind::poisson;
    s.truth = detail::steps(1000, {0, 120, 250, 400, 520, 650, 780, 900}, {0.5, 3.0, 1.0, 6.0, 0.3, 2.5, 8.0, 1.5});
    s.stand_in = true;
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "single-bump";
    s.note = "n = 500, bump of height 1 on 30% of the grid, sigma = 1";
    s.truth = detail::steps(500, {0, 175, 325}, {0.0, 1.0, 0.0});
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "two-jump";
    s.note = "n = 500, smallest segment 25%, jumps of size 2, sigma = 1";
    s.truth = detail::steps(500, {0, 125, 375}, {0.0, 2.0, 0.0});
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "null-k0";
    s.note = "n = 500, constant signal";
    s.truth = detail::steps(500, {0}, {0.0});
    out.push_back(s);
  }
  {
    Scenario s;
    s.name = "zero-noise";
    s.note = "noiseless data, n = 200, 3 jumps";
    s.truth = detail::steps(200, {0, 50, 100, 150}, {0.0, 5.0, -3.0, 2.0});
    s.noise_sd = 0.0;
    s.model_sigma = 1.0;
    s.reps = 20;
    out.push_back(s);
  }
  return out;
}

inline Scenario find_scenario(const std::string& name) {
  for (auto& s : scenario_registry())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown scenario: " + name);
}

}  // namespace smuce
