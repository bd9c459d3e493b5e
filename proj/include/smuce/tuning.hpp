#pragma once

// Error bounds for the estimated number of jumps and the automatic
// threshold q*. Jump sizes for the Gaussian mean family are measured in
// units of sigma; for other families in natural-parameter units.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "smuce/expfam.hpp"
#include "smuce/nulldist.hpp"

namespace smuce {

/// Smallest segment length lambda (fraction of n), smallest absolute jump
/// delta and the box [theta_lo, theta_hi] holding the signal.
struct SignalPrior {
  double lambda_min = 0.5;
  double delta_min = 1.0;
  double theta_lo = 0.0;
  double theta_hi = 0.0;

  void validate() const {
    if (!(lambda_min > 0.0 && lambda_min <= 1.0)) throw std::invalid_argument("SignalPrior: lambda must lie in (0, 1]");
    if (!(delta_min > 0.0)) throw std::invalid_argument("SignalPrior: delta must be positive");
    if (!(theta_lo <= theta_hi)) throw std::invalid_argument("SignalPrior: empty parameter box");
  }
};

inline double alpha_of_q(const NullTable& table, double q) { return table.survival(q); }

namespace detail {

inline double cap01(double v) { return std::clamp(v, 0.0, 1.0); }

// log(e^a + e^b)
inline double log_add(double a, double b) {
  const double m = std::max(a, b);
  if (m == -kInf) return -kInf;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

/// Gaussian bound on P(K_hat < K) with K replaced by 1 / lambda, before capping.
inline double beta_bound_raw(double q, double eta, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("beta_bound: lambda must lie in (0, 1]");
  if (!(eta > 0.0)) throw std::invalid_argument("beta_bound: eta must be positive");
  const double gap = std::max(0.0, eta / (2.0 * std::sqrt(2.0)) - q - std::sqrt(2.0 * std::log(2.0 * std::exp(1.0) / lambda)));
  return (2.0 / lambda) * (std::exp(-gap * gap / 8.0) + std::exp(-eta * eta / 16.0));
}

inline double beta_bound(double q, double eta, double lambda) { return detail::cap01(beta_bound_raw(q, eta, lambda)); }

/// Gaussian bound on P(K_hat < K) for K jumps, smallest jump delta (in units
/// of sigma) and smallest segment fraction lambda, before capping.
inline double gaussian_underestimation_bound_raw(double q, std::size_t n, double lambda, double delta, std::size_t K) {
  const double eta = std::sqrt(static_cast<double>(n) * lambda) * delta;
  const double gap = std::max(0.0, eta / (2.0 * std::sqrt(2.0)) - q - std::sqrt(2.0 * std::log(2.0 * std::exp(1.0) / lambda)));
  return 2.0 * static_cast<double>(K) * (std::exp(-gap * gap / 8.0) + std::exp(-eta * eta / 16.0));
}

inline double gaussian_underestimation_bound(double q, std::size_t n, double lambda, double delta, std::size_t K) {
  return detail::cap01(gaussian_underestimation_bound_raw(q, n, lambda, delta, K));
}

struct LambdaStar {
  double lambda = 0.0;
  double eta = 0.0;
};

/// Root of sqrt(n) lambda = 12 sqrt(-log lambda) on (0, 1), and
/// eta* = 12 sqrt(-log lambda*).
inline LambdaStar solve_lambda_star(std::size_t n) {
  if (n < 2) throw std::invalid_argument("solve_lambda_star: n must be at least 2");
  const double rn = std::sqrt(static_cast<double>(n));
  auto f = [&](double l) { return rn * l - 12.0 * std::sqrt(-std::log(l)); };
  double lo = 0.0;  // f -> -inf
  double hi = 1.0;  // f(1) = sqrt(n) > 0
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  const double l = 0.5 * (lo + hi);
  return {l, 12.0 * std::sqrt(-std::log(l))};
}

struct QChoice {
  double q = 0.0;
  double alpha = 0.0;
  double beta = 0.0;       // uncapped beta_bound, so objective = 1 - alpha - beta
  double objective = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
};

/// Maximises 1 - alpha(q) - beta(q, eta, lambda) over a grid with step at
/// most 0.01 across the positive part of the table's range (the whole range
/// when the table has no positive sample); ties go to the smallest q.
inline QChoice choose_q(const NullTable& table, double lambda, double eta) {
  if (table.samples.empty()) throw std::invalid_argument("choose_q: empty null table");
  double lo = table.samples.front();
  const double hi = table.samples.back();
  if (hi > 0.0 && lo < 0.0) lo = 0.0;
  const double width = hi - lo;
  const std::size_t steps = width > 0.0 ? static_cast<std::size_t>(std::ceil(width / 0.01 - 1e-9)) : 0;
  QChoice best;
  best.objective = -kInf;
  best.lambda = lambda;
  best.eta = eta;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double q = steps == 0 ? lo : lo + width * static_cast<double>(i) / static_cast<double>(steps);
    if (q <= 0.0 && hi > 0.0) continue;
    const double a = alpha_of_q(table, q);
    const double b = beta_bound_raw(q, eta, lambda);
    const double obj = 1.0 - a - b;
    if (obj > best.objective) {
      best.q = q;
      best.alpha = a;
      best.beta = b;
      best.objective = obj;
    }
  }
  return best;
}

/// q* for sample size n under the worst-case prior (lambda*, eta*).
inline QChoice choose_q(std::size_t n, const NullTable& table) {
  const LambdaStar ls = solve_lambda_star(n);
  return choose_q(table, ls.lambda, ls.eta);
}

/// (1/32) inf v^2 / sup v over the parameter box; 1/32 for the Gaussian
/// mean family in sigma units.
inline double family_constant(const ExpFamily& fam, const SignalPrior& prior) {
  if (fam.kind() == FamilyKind::gauss_mean) return 1.0 / 32.0;
  const double a = fam.variance(prior.theta_lo);
  const double b = fam.variance(prior.theta_hi);
  const double vinf = std::min(a, b);
  double vsup = std::max(a, b);
  if (fam.kind() == FamilyKind::bernoulli && prior.theta_lo < 0.0 && prior.theta_hi > 0.0) vsup = 0.25;
  return vinf * vinf / (32.0 * vsup);
}

/// Generic bound on P(K_hat < K) before capping:
/// 2K e^{-C n lambda D^2} [e^{(q + sqrt(2 log(2e/lambda)))^2 / 2} + e^{-3 C n lambda D^2}].
inline double underestimation_bound_raw(double q, std::size_t n, const SignalPrior& prior, std::size_t K,
                                        const ExpFamily& fam) {
  prior.validate();
  const double C = family_constant(fam, prior);
  const double e = C * static_cast<double>(n) * prior.lambda_min * prior.delta_min * prior.delta_min;
  const double s = q + std::sqrt(2.0 * std::log(2.0 * std::exp(1.0) / prior.lambda_min));
  return std::exp(std::log(2.0 * static_cast<double>(K)) - e + detail::log_add(0.5 * s * s, -3.0 * e));
}

inline double underestimation_bound(double q, std::size_t n, const SignalPrior& prior, std::size_t K,
                                    const ExpFamily& fam) {
  return detail::cap01(underestimation_bound_raw(q, n, prior, K, fam));
}

/// Bound on the probability that some true jump is farther than c (as a
/// fraction of n) from every jump of some member of the confidence set,
/// before capping.
inline double location_error_bound_raw(double q, std::size_t n, double c, const SignalPrior& prior, std::size_t K,
                                       const ExpFamily& fam) {
  prior.validate();
  if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("location_error_bound: c must lie in (0, 1]");
  const double C = family_constant(fam, prior);
  const double e = 2.0 * C * static_cast<double>(n) * c * prior.delta_min * prior.delta_min;
  const double s = q + std::sqrt(2.0 * std::log(std::exp(1.0) / c));
  return std::exp(std::log(2.0 * static_cast<double>(K)) - e + detail::log_add(0.5 * s * s, -3.0 * e));
}

inline double location_error_bound(double q, std::size_t n, double c, const SignalPrior& prior, std::size_t K,
                                   const ExpFamily& fam) {
  return detail::cap01(location_error_bound_raw(q, n, c, prior, K, fam));
}

}  // namespace smuce
