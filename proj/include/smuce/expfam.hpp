#pragma once

// One-parameter exponential families f_theta(x) = exp(theta x - psi(theta))
// in natural parametrisation, together with the divergence
// J(x, theta) = phi(x) - (theta x - psi(theta)) that drives every local
// likelihood-ratio statistic in the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "smuce/error.hpp"

namespace smuce {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval [lower, upper] on the extended real line. An interval
/// with lower > upper (or a NaN endpoint) is the empty set.
struct ValueInterval {
  double lower = -kInf;
  double upper = kInf;

  static constexpr ValueInterval everything() { return {-kInf, kInf}; }
  static constexpr ValueInterval empty_set() { return {kInf, -kInf}; }

  bool empty() const { return !(lower <= upper); }
  bool contains(double v) const { return lower <= v && v <= upper; }

  ValueInterval intersect(const ValueInterval& o) const {
    return {std::max(lower, o.lower), std::min(upper, o.upper)};
  }
  ValueInterval hull(const ValueInterval& o) const {
    if (empty()) return o;
    if (o.empty()) return *this;
    return {std::min(lower, o.lower), std::max(upper, o.upper)};
  }
  double clamp(double v) const { return std::min(std::max(v, lower), upper); }

  friend bool operator==(const ValueInterval&, const ValueInterval&) = default;
};

enum class FamilyKind { gauss_mean, gauss_variance, poisson, bernoulli };

/// Interval summary entering a local statistic: mean of the sufficient
/// statistic over `count` consecutive samples, tested against theta0.
struct LocalStatInput {
  double sample_mean = 0.0;
  std::size_t count = 1;
  double theta0 = 0.0;
};

namespace detail {

inline double softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }

}  // namespace detail

/// Regular one-parameter exponential family. Gaussian variance operates on
/// the sufficient statistic Z = Y^2; the transform is the caller's job.
/// The Gaussian mean family optionally carries an MA(1) coefficient, in which
/// case local statistics are normalised by the variance of the moving-average
/// partial sum.
class ExpFamily {
 public:
  static ExpFamily gauss_mean(double sigma = 1.0, double ma_beta = 0.0) {
    if (!(sigma > 0) || !std::isfinite(sigma))
      throw std::invalid_argument("gauss-mean: sigma must be positive");
    if (!(ma_beta > -1.0 && ma_beta < 1.0))
      throw std::invalid_argument("gauss-mean: MA coefficient must lie in (-1, 1)");
    return ExpFamily(FamilyKind::gauss_mean, sigma, ma_beta);
  }
  static ExpFamily gauss_variance() { return ExpFamily(FamilyKind::gauss_variance, 1.0, 0.0); }
  static ExpFamily poisson() { return ExpFamily(FamilyKind::poisson, 1.0, 0.0); }
  static ExpFamily bernoulli() { return ExpFamily(FamilyKind::bernoulli, 1.0, 0.0); }

  /// Parses "gauss-mean", "gauss-variance", "poisson", "bernoulli".
  static ExpFamily from_name(std::string_view name, double sigma = 1.0, double ma_beta = 0.0) {
    if (name == "gauss-mean") return gauss_mean(sigma, ma_beta);
    if (name == "gauss-variance") return gauss_variance();
    if (name == "poisson") return poisson();
    if (name == "bernoulli") return bernoulli();
    throw std::invalid_argument("unknown family: " + std::string(name));
  }

  FamilyKind kind() const { return kind_; }
  double sigma() const { return sigma_; }
  double ma_beta() const { return ma_beta_; }
  bool has_ma() const { return ma_beta_ != 0.0; }

  std::string name() const {
    switch (kind_) {
      case FamilyKind::gauss_mean: return "gauss-mean";
      case FamilyKind::gauss_variance: return "gauss-variance";
      case FamilyKind::poisson: return "poisson";
      case FamilyKind::bernoulli: return "bernoulli";
    }
    return "unknown";
  }

  // Natural parameter space is the open interval (theta_min, theta_max).
  double theta_min() const { return -kInf; }
  double theta_max() const { return kind_ == FamilyKind::gauss_variance ? 0.0 : kInf; }
  bool in_theta_domain(double theta) const { return theta > theta_min() && theta < theta_max(); }

  // Mean domain is the open interval (mean_min, mean_max).
  double mean_min() const {
    return kind_ == FamilyKind::gauss_mean ? -kInf : 0.0;
  }
  double mean_max() const { return kind_ == FamilyKind::bernoulli ? 1.0 : kInf; }
  bool in_mean_closure(double x) const { return x >= mean_min() && x <= mean_max(); }
  /// Pulls a mean computed from differences of cumulative sums back into the
  /// closure of the mean domain (rounding can leave it a few ulps outside).
  double clamp_mean(double x) const { return std::min(std::max(x, mean_min()), mean_max()); }

  double cumulant(double theta) const {
    require_theta(theta);
    switch (kind_) {
      case FamilyKind::gauss_mean: return 0.5 * sigma_ * sigma_ * theta * theta;
      case FamilyKind::gauss_variance: return -0.5 * std::log(-2.0 * theta);
      case FamilyKind::poisson: return std::exp(theta);
      case FamilyKind::bernoulli: return detail::softplus(theta);
    }
    return 0.0;
  }

  double mean(double theta) const {
    require_theta(theta);
    return mean_extended(theta);
  }

  double variance(double theta) const {
    require_theta(theta);
    switch (kind_) {
      case FamilyKind::gauss_mean: return sigma_ * sigma_;
      case FamilyKind::gauss_variance: return 0.5 / (theta * theta);
      case FamilyKind::poisson: return std::exp(theta);
      case FamilyKind::bernoulli: {
        const double p = logistic(theta);
        return p * (1.0 - p);
      }
    }
    return 0.0;
  }

  /// m^{-1}(mu) for mu in the open mean domain.
  double mean_inverse(double mu) const {
    if (!in_mean_closure(mu) || std::isnan(mu))
      throw DomainError(name() + ": mean outside the mean domain");
    if (mu == mean_min() || mu == mean_max())
      throw BoundaryError(name() + ": mean on the boundary of the mean domain");
    return natural_extended(mu);
  }

  /// m(theta) continued to the endpoints of the parameter space.
  double mean_extended(double theta) const {
    switch (kind_) {
      case FamilyKind::gauss_mean: return sigma_ * sigma_ * theta;
      case FamilyKind::gauss_variance:
        if (theta == -kInf) return 0.0;
        if (theta >= 0.0) return kInf;
        return -0.5 / theta;
      case FamilyKind::poisson: return std::exp(theta);
      case FamilyKind::bernoulli: return logistic(theta);
    }
    return 0.0;
  }

  /// m^{-1} on the closure of the mean domain; boundary means map to the
  /// corresponding (infinite) end of the parameter space.
  double natural_extended(double mu) const {
    if (!in_mean_closure(mu) || std::isnan(mu))
      throw DomainError(name() + ": mean outside the mean domain");
    switch (kind_) {
      case FamilyKind::gauss_mean: return mu / (sigma_ * sigma_);
      case FamilyKind::gauss_variance:
        if (mu == 0.0) return -kInf;
        if (mu == kInf) return 0.0;
        return -0.5 / mu;
      case FamilyKind::poisson: return mu == 0.0 ? -kInf : std::log(mu);
      case FamilyKind::bernoulli:
        if (mu == 0.0) return -kInf;
        if (mu == 1.0) return kInf;
        return std::log(mu) - std::log1p(-mu);
    }
    return 0.0;
  }

  /// Legendre-Fenchel conjugate phi(x) on the closure of the mean domain,
  /// using its boundary limit (which may be +inf).
  double conjugate(double x) const {
    if (!in_mean_closure(x) || std::isnan(x))
      throw DomainError(name() + ": argument outside the mean domain");
    switch (kind_) {
      case FamilyKind::gauss_mean: return x * x / (2.0 * sigma_ * sigma_);
      case FamilyKind::gauss_variance: return x == 0.0 ? kInf : -0.5 - 0.5 * std::log(x);
      case FamilyKind::poisson: return detail::xlogx(x) - x;
      case FamilyKind::bernoulli: return detail::xlogx(x) + detail::xlogx(1.0 - x);
    }
    return 0.0;
  }

  /// Variance of a mean over `count` samples fed to the Gaussian divergence,
  /// times count; sigma^2 for independent data.
  double effective_variance(std::size_t count) const {
    if (!has_ma()) return sigma_ * sigma_;
    const double m = static_cast<double>(count);
    const double b = ma_beta_;
    return sigma_ * sigma_ * (m * (1.0 + b * b) + (m - 1.0) * b) / m;
  }

  /// J(x, theta) >= 0 for x in the closure of the mean domain and theta in
  /// the closure of the parameter space. `count` only matters under MA(1).
  double divergence(double x, double theta, std::size_t count = 1) const {
    if (!in_mean_closure(x) || std::isnan(x))
      throw DomainError(name() + ": argument outside the mean domain");
    if (std::isnan(theta) || theta < theta_min() || theta > theta_max())
      throw DomainError(name() + ": parameter outside the natural parameter space");
    switch (kind_) {
      case FamilyKind::gauss_mean: {
        if (std::isinf(theta)) return kInf;
        const double d = x - sigma_ * sigma_ * theta;
        return d * d / (2.0 * effective_variance(count));
      }
      case FamilyKind::gauss_variance: {
        if (x == 0.0 || theta == -kInf || theta == 0.0) return kInf;
        const double r = -2.0 * theta * x;  // x / sigma^2
        return std::max(0.0, 0.5 * ((r - 1.0) - std::log1p(r - 1.0)));
      }
      case FamilyKind::poisson: {
        if (theta == -kInf) return x == 0.0 ? 0.0 : kInf;
        if (theta == kInf) return kInf;
        if (x == 0.0) return std::exp(theta);
        const double u = theta - std::log(x);
        return std::max(0.0, x * (std::expm1(u) - u));
      }
      case FamilyKind::bernoulli: {
        if (theta == -kInf) return x == 0.0 ? 0.0 : kInf;
        if (theta == kInf) return x == 1.0 ? 0.0 : kInf;
        const double log_p = -detail::softplus(-theta);
        const double log_q = -detail::softplus(theta);
        double j = 0.0;
        if (x > 0.0) j += x * (std::log(x) - log_p);
        if (x < 1.0) j += (1.0 - x) * (std::log1p(-x) - log_q);
        return std::max(0.0, j);
      }
    }
    return 0.0;
  }

  /// Kullback-Leibler divergence D(theta || theta_tilde).
  double kl_divergence(double theta, double theta_tilde) const {
    require_theta(theta);
    require_theta(theta_tilde);
    const double d = cumulant(theta_tilde) - cumulant(theta) - (theta_tilde - theta) * mean(theta);
    return std::max(0.0, d);
  }

  /// T = count * J(sample_mean, theta0).
  double local_stat(const LocalStatInput& in) const {
    if (in.count == 0) throw std::invalid_argument("local_stat: count must be positive");
    require_theta(in.theta0);
    return static_cast<double>(in.count) * divergence(in.sample_mean, in.theta0, in.count);
  }

  /// Negative log-likelihood count * (psi(theta) - theta x), continued to
  /// infinite theta by its limit where that limit is finite.
  double segment_cost(double sample_mean, std::size_t count, double theta) const {
    const double c = static_cast<double>(count);
    if (std::isinf(theta) || (kind_ == FamilyKind::gauss_variance && theta == 0.0)) {
      const double j = divergence(sample_mean, theta, count);
      if (!std::isfinite(j)) return kInf;
      return c * (j - conjugate(sample_mean));
    }
    return c * (cumulant(theta) - theta * sample_mean);
  }

  /// Sublevel set {theta : J(sample_mean, theta) <= threshold} in the
  /// closure of the parameter space. Infinite endpoints stand for boundary
  /// means (e.g. a Poisson intensity of zero).
  ValueInterval feasible_interval(double sample_mean, std::size_t count, double threshold) const {
    if (count == 0) throw std::invalid_argument("feasible_interval: count must be positive");
    if (std::isnan(threshold) || threshold < 0.0)
      throw std::invalid_argument("feasible_interval: negative threshold marks an infeasible scale");
    const double x = sample_mean;
    const double centre = natural_extended(x);
    if (threshold == kInf) return {theta_min(), theta_max()};

    switch (kind_) {
      case FamilyKind::gauss_mean: {
        const double half = std::sqrt(2.0 * threshold * effective_variance(count));
        const double s2 = sigma_ * sigma_;
        return {(x - half) / s2, (x + half) / s2};
      }
      case FamilyKind::gauss_variance:
        if (x == 0.0) return ValueInterval::empty_set();
        break;
      case FamilyKind::poisson:
        if (x == 0.0) return {-kInf, threshold > 0 ? std::log(threshold) : -kInf};
        break;
      case FamilyKind::bernoulli:
        if (x == 0.0) return {-kInf, threshold > 0 ? std::log(std::expm1(threshold)) : -kInf};
        if (x == 1.0) return {threshold > 0 ? -std::log(std::expm1(threshold)) : kInf, kInf};
        break;
    }
    if (threshold == 0.0) return {centre, centre};
    return {side_root(x, count, threshold, centre, -1), side_root(x, count, threshold, centre, +1)};
  }

 private:
  ExpFamily(FamilyKind k, double sigma, double ma_beta) : kind_(k), sigma_(sigma), ma_beta_(ma_beta) {}

  static double logistic(double t) {
    return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  }

  void require_theta(double theta) const {
    if (!in_theta_domain(theta))
      throw DomainError(name() + ": parameter outside the natural parameter space");
  }

  // Root of J(x, .) = t on one side of the interior minimiser `centre`,
  // by bracket expansion and bisection. Returns the endpoint on the feasible
  // side, so J <= t always holds at the result.
  double side_root(double x, std::size_t count, double t, double centre, int dir) const {
    const double bound = dir > 0 ? theta_max() : theta_min();
    const double curv = variance(centre);
    double step = std::sqrt(2.0 * t / curv);
    if (!(step > 0) || !std::isfinite(step)) step = 1.0;

    auto f = [&](double th) { return divergence(x, th, count) - t; };
    double inner = centre;
    double outer = centre;
    bool bracketed = false;
    for (int k = 0; k < 200; ++k) {
      double probe = centre + dir * step;
      if (std::isfinite(bound) && dir * (bound - probe) <= 0.0)
        probe = bound - (bound - inner) * 0.5;  // approach a finite end geometrically
      if (probe == inner) break;
      if (f(probe) > 0.0) {
        outer = probe;
        bracketed = true;
        break;
      }
      inner = probe;
      step *= 2.0;
    }
    if (!bracketed) return bound;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (inner + outer);
      if (mid == inner || mid == outer) break;
      if (std::abs(outer - inner) <= 1e-13 * std::max(1.0, std::abs(inner))) break;
      if (f(mid) > 0.0)
        outer = mid;
      else
        inner = mid;
    }
    return inner;
  }

  FamilyKind kind_;
  double sigma_;
  double ma_beta_;
};

}  // namespace smuce
