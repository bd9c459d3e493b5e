#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "smuce/expfam.hpp"

namespace smuce {

/// Piecewise-constant function on the grid 0..n-1. `boundaries` holds the
/// first index of every segment (so boundaries[0] == 0); `values` holds one
/// parameter per segment.
struct StepFunction {
  std::size_t n = 0;
  std::vector<std::size_t> boundaries;
  std::vector<double> values;

  std::size_t segments() const { return boundaries.size(); }
  std::size_t jumps() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
  std::size_t segment_begin(std::size_t k) const { return boundaries[k]; }
  std::size_t segment_end(std::size_t k) const {  // exclusive
    return k + 1 < boundaries.size() ? boundaries[k + 1] : n;
  }

  double value_at(std::size_t i) const {
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), i);
    return values[static_cast<std::size_t>(it - boundaries.begin()) - 1];
  }

  std::vector<double> expand() const {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < segments(); ++k)
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(segment_begin(k)),
                out.begin() + static_cast<std::ptrdiff_t>(segment_end(k)), values[k]);
    return out;
  }

  void validate() const {
    if (n == 0) throw std::invalid_argument("step function: empty grid");
    if (boundaries.empty() || boundaries.front() != 0)
      throw std::invalid_argument("step function: first segment must start at 0");
    for (std::size_t k = 1; k < boundaries.size(); ++k)
      if (boundaries[k] <= boundaries[k - 1])
        throw std::invalid_argument("step function: boundaries must be strictly increasing");
    if (boundaries.back() >= n) throw std::invalid_argument("step function: boundary beyond grid");
    if (values.size() != boundaries.size())
      throw std::invalid_argument("step function: one value per segment required");
  }

  friend bool operator==(const StepFunction&, const StepFunction&) = default;
};

/// Scale calibration of the local statistics.
///  sqrt:         sqrt(2T) - sqrt(2 log(e n / len))
///  loglog:       (T - 2 log(n / len)) / log log(e^e n / len)
///  uncalibrated: sqrt(2T)
enum class PenaltyMode { sqrt, loglog, uncalibrated };

inline std::string to_string(PenaltyMode m) {
  switch (m) {
    case PenaltyMode::sqrt: return "sqrt";
    case PenaltyMode::loglog: return "loglog";
    case PenaltyMode::uncalibrated: return "uncalibrated";
  }
  return "sqrt";
}

inline PenaltyMode parse_penalty_mode(std::string_view s) {
  if (s == "sqrt") return PenaltyMode::sqrt;
  if (s == "loglog") return PenaltyMode::loglog;
  if (s == "uncalibrated") return PenaltyMode::uncalibrated;
  throw std::invalid_argument("unknown penalty mode: " + std::string(s));
}

/// sqrt(2 log(e n / len)).
inline double penalty(std::size_t len, std::size_t n) {
  return std::sqrt(2.0 * (1.0 + std::log(static_cast<double>(n) / static_cast<double>(len))));
}

/// Offset and divisor combining a local statistic T into the multiscale
/// maximum. For sqrt and uncalibrated modes the divisor is unused.
struct ScaleTerm {
  double offset = 0.0;
  double divisor = 1.0;
};

inline ScaleTerm scale_term(std::size_t len, std::size_t n, PenaltyMode mode) {
  switch (mode) {
    case PenaltyMode::sqrt: return {penalty(len, n), 1.0};
    case PenaltyMode::uncalibrated: return {0.0, 1.0};
    case PenaltyMode::loglog: {
      const double r = std::log(static_cast<double>(n) / static_cast<double>(len));
      return {2.0 * r, std::log(std::exp(1.0) + r)};
    }
  }
  return {};
}

/// Contribution of one interval with local statistic T.
inline double calibrate(double T, ScaleTerm term, PenaltyMode mode) {
  T = std::max(T, 0.0);
  if (mode == PenaltyMode::loglog) return (T - term.offset) / term.divisor;
  return std::sqrt(2.0 * T) - term.offset;
}

/// Largest local statistic T an interval of length len may carry when the
/// calibrated contribution must not exceed q; nullopt when no T >= 0 works.
inline std::optional<double> max_local_stat(double q, std::size_t len, std::size_t n,
                                            PenaltyMode mode) {
  const ScaleTerm term = scale_term(len, n, mode);
  if (mode == PenaltyMode::loglog) {
    const double t = q * term.divisor + term.offset;
    if (t < 0.0) return std::nullopt;
    return t;
  }
  const double s = q + term.offset;
  if (s < 0.0) return std::nullopt;
  return 0.5 * s * s;
}

/// Smallest interval length admitted by a minimum scale c: ceil(c n), at least 1.
inline std::size_t min_length(double min_scale, std::size_t n) {
  if (!(min_scale > 0.0) || min_scale > 1.0)
    throw std::invalid_argument("min_scale must lie in (0, 1]");
  const double raw = std::ceil(min_scale * static_cast<double>(n) - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

/// Variance of an MA(1) partial sum of `count` terms in the normalisation
/// sigma^2 [count (1 + beta^2) + (count - 1) beta].
inline double ma1_local_scale(std::size_t count, double sigma, double beta_ma) {
  const double m = static_cast<double>(count);
  return sigma * sigma * (m * (1.0 + beta_ma * beta_ma) + (m - 1.0) * beta_ma);
}

/// Cumulative sums with a leading zero; sum(i, j) covers [i, j).
class PrefixSums {
 public:
  PrefixSums() = default;
  explicit PrefixSums(std::span<const double> y) : cum_(y.size() + 1, 0.0) {
    for (std::size_t i = 0; i < y.size(); ++i) cum_[i + 1] = cum_[i] + y[i];
  }
  std::size_t size() const { return cum_.empty() ? 0 : cum_.size() - 1; }
  double sum(std::size_t begin, std::size_t end) const { return cum_[end] - cum_[begin]; }
  double mean(std::size_t begin, std::size_t end) const {
    return sum(begin, end) / static_cast<double>(end - begin);
  }
  const std::vector<double>& raw() const { return cum_; }

 private:
  std::vector<double> cum_;
};

namespace detail {

// Extremes of window sums of length len over cum[begin..end].
inline void window_extremes(const std::vector<double>& cum, std::size_t begin, std::size_t end,
                            std::size_t len, double& lo, double& hi) {
  lo = kInf;
  hi = -kInf;
  const double* c = cum.data();
  for (std::size_t i = begin; i + len <= end; ++i) {
    const double s = c[i + len] - c[i];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
}

}  // namespace detail

/// Multiscale statistic of a candidate over the data: maximum over segments
/// and over subintervals of each segment with length >= ceil(min_scale n) of
/// the calibrated local statistic. Returns -inf if no interval qualifies.
///
/// J(., theta) is convex, so for a fixed length only the windows with the
/// smallest and largest sum can attain the maximum; each length costs one
/// pass over the segment.
inline double multiscale_stat(std::span<const double> y, const ExpFamily& fam,
                              const StepFunction& cand, double min_scale = 0.0,
                              PenaltyMode mode = PenaltyMode::sqrt) {
  const std::size_t n = y.size();
  if (cand.n != n) throw std::invalid_argument("multiscale_stat: candidate length mismatch");
  cand.validate();
  for (double v : cand.values)
    if (!fam.in_theta_domain(v) && !std::isinf(v))
      throw DomainError("multiscale_stat: candidate value outside the parameter space");
  const std::size_t min_len = min_scale > 0.0 ? min_length(min_scale, n) : 1;
  const PrefixSums ps(y);

  double best = -kInf;
  for (std::size_t k = 0; k < cand.segments(); ++k) {
    const std::size_t b = cand.segment_begin(k);
    const std::size_t e = cand.segment_end(k);
    const double theta = cand.values[k];
    for (std::size_t len = min_len; len <= e - b; ++len) {
      double lo = 0.0;
      double hi = 0.0;
      detail::window_extremes(ps.raw(), b, e, len, lo, hi);
      const double dl = static_cast<double>(len);
      const double T = dl * std::max(fam.divergence(fam.clamp_mean(lo / dl), theta, len),
                                     fam.divergence(fam.clamp_mean(hi / dl), theta, len));
      best = std::max(best, calibrate(T, scale_term(len, n, mode), mode));
    }
  }
  return best;
}

}  // namespace smuce
