#pragma once

// Minimal-jump constrained maximum likelihood segmentation.
//
// Stage 1 sweeps p = 0..n-1, maintaining the running intersections
// B_{r,p} = B_{r,p-1} ∩ B_{r+1,p} ∩ b_{r,p} of the per-interval feasible
// value sets for r = p down to the first empty one. Since [r,p] infeasible
// implies [r-1,p] and [r,p+1] infeasible, only r >= r_min(p) is visited and
// the minimal jump count of every prefix follows directly.
//
// Stage 2 maximises the likelihood over fits with exactly k_hat jumps. A
// prefix [0,p] ending a segment can carry j jumps only if its own minimum
// J(p) <= j and the rest [p+1,n) can be done with k_hat-1-j jumps, so the
// table over (p, j) is narrow.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smuce/error.hpp"
#include "smuce/expfam.hpp"
#include "smuce/multiscale.hpp"

namespace smuce {

/// Per-observation divergence threshold for an interval of length len:
/// (q + penalty)^2 / (2 len) in sqrt mode. nullopt when the interval can
/// never pass (q + penalty < 0).
inline std::optional<double> interval_threshold(double q, std::size_t len, std::size_t n,
                                                PenaltyMode mode = PenaltyMode::sqrt) {
  if (len == 0 || len > n) throw std::invalid_argument("interval_threshold: length outside [1, n]");
  const auto t = max_local_stat(q, len, n, mode);
  if (!t) return std::nullopt;
  return *t / static_cast<double>(len);
}

/// interval_threshold for every length 1..n. Lengths below the minimum scale
/// are unconstrained (+inf); infeasible lengths are stored as -1.
class ThresholdTable {
 public:
  ThresholdTable(double q, std::size_t n, double min_scale = 0.0, PenaltyMode mode = PenaltyMode::sqrt)
      : q_(q), n_(n), mode_(mode), min_len_(min_scale > 0.0 ? min_length(min_scale, n) : 1), thr_(n + 1, kInf) {
    if (n == 0) throw std::invalid_argument("ThresholdTable: n must be positive");
    if (!std::isfinite(q)) throw std::invalid_argument("ThresholdTable: q must be finite");
    for (std::size_t len = min_len_; len <= n; ++len) {
      const auto t = interval_threshold(q, len, n, mode);
      thr_[len] = t ? *t : -1.0;
    }
  }

  double at(std::size_t len) const { return thr_[len]; }
  bool feasible(std::size_t len) const { return thr_[len] >= 0.0; }
  double q() const { return q_; }
  std::size_t n() const { return n_; }
  std::size_t min_len() const { return min_len_; }
  PenaltyMode mode() const { return mode_; }

  /// Value of the statistic for a fit whose every qualifying interval has T = 0
  /// (shortest qualifying intervals dominate).
  double floor_stat() const { return calibrate(0.0, scale_term(min_len_, n_, mode_), mode_); }

 private:
  double q_;
  std::size_t n_;
  PenaltyMode mode_;
  std::size_t min_len_;
  std::vector<double> thr_;
};

struct SegmentOptimum {
  double value = 0.0;
  double cost = 0.0;  // negative log-likelihood of the segment at `value`
};

/// A data model the DP can segment. restrict(i, j, t, cur) returns cur
/// intersected with the values whose local statistic on [i, j] (inclusive)
/// is within per-observation threshold t; optimum(i, j, B) returns the
/// likelihood-optimal value in B and its cost.
template <class M>
concept SegmentModel = requires(M& m, const M& cm, std::size_t i, std::size_t j, double t, ValueInterval b) {
  { cm.size() } -> std::convertible_to<std::size_t>;
  { m.restrict(i, j, t, b) } -> std::convertible_to<ValueInterval>;
  { m.optimum(i, j, b) } -> std::convertible_to<SegmentOptimum>;
};

/// Exponential-family data: sufficient statistics with prefix sums.
class ExpFamModel {
 public:
  ExpFamModel(std::span<const double> y, const ExpFamily& fam) : fam_(fam), ps_(y) {
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!std::isfinite(y[i]) || !fam.in_mean_closure(y[i]))
        throw DomainError(fam.name() + ": observation " + std::to_string(i) + " outside the sample space");
  }

  std::size_t size() const { return ps_.size(); }
  const ExpFamily& family() const { return fam_; }

  double mean(std::size_t i, std::size_t j) const { return fam_.clamp_mean(ps_.mean(i, j + 1)); }

  ValueInterval restrict(std::size_t i, std::size_t j, double t, ValueInterval cur) const {
    if (cur.empty() || t == kInf) return cur;
    const double x = mean(i, j);
    const std::size_t cnt = j - i + 1;
    if (fam_.kind() != FamilyKind::gauss_mean) {
      // Convexity: if both ends pass, the whole interval does.
      if (fam_.divergence(x, cur.lower, cnt) <= t && fam_.divergence(x, cur.upper, cnt) <= t) return cur;
    }
    return cur.intersect(fam_.feasible_interval(x, cnt, t));
  }

  SegmentOptimum optimum(std::size_t i, std::size_t j, ValueInterval b) const {
    const double x = mean(i, j);
    const double theta = b.clamp(fam_.natural_extended(x));
    return {theta, fam_.segment_cost(x, j - i + 1, theta)};
  }

 private:
  ExpFamily fam_;
  PrefixSums ps_;
};

/// View of a model with the sample order reversed.
template <SegmentModel M>
class ReversedModel {
 public:
  explicit ReversedModel(M& inner) : inner_(&inner), n_(inner.size()) {}
  std::size_t size() const { return n_; }
  ValueInterval restrict(std::size_t i, std::size_t j, double t, ValueInterval cur) {
    return inner_->restrict(n_ - 1 - j, n_ - 1 - i, t, cur);
  }
  SegmentOptimum optimum(std::size_t i, std::size_t j, ValueInterval b) {
    return inner_->optimum(n_ - 1 - j, n_ - 1 - i, b);
  }

 private:
  M* inner_;
  std::size_t n_;
};

/// Running intersections B_{r,p} for the current sweep position p, over
/// r in [r_min(p), p]. Samples before `first` are ignored, so the sweep can
/// also run over a sub-range [first, ...).
template <SegmentModel M>
class FeasibleBounds {
 public:
  FeasibleBounds(M& model, const ThresholdTable& thr, std::size_t first = 0)
      : model_(&model), thr_(&thr), first_(first), next_(first), rmin_(first),
        bounds_(model.size() - first, ValueInterval::empty_set()) {}

  /// Processes the next position and returns r_min there (p + 1 when even
  /// the singleton is infeasible).
  std::size_t advance() {
    const std::size_t p = next_++;
    if (p >= model_->size()) throw std::out_of_range("FeasibleBounds: sweep past the end");
    const std::size_t lowest = rmin_;
    std::size_t r = p + 1;
    while (r > lowest) {
      --r;
      ValueInterval cur = r < p ? at(r).intersect(at(r + 1)) : ValueInterval::everything();
      const double t = thr_->at(p - r + 1);
      cur = t < 0.0 ? ValueInterval::empty_set() : model_->restrict(r, p, t, cur);
      at(r) = cur;
      if (cur.empty()) {
        rmin_ = r + 1;
        return rmin_;
      }
    }
    rmin_ = lowest;
    return rmin_;
  }

  std::size_t position() const { return next_ - 1; }
  std::size_t r_min() const { return rmin_; }
  /// B_{r,p} for r in [r_min(), position()].
  const ValueInterval& bound(std::size_t r) const { return bounds_[r - first_]; }

 private:
  ValueInterval& at(std::size_t r) { return bounds_[r - first_]; }

  M* model_;
  const ThresholdTable* thr_;
  std::size_t first_;
  std::size_t next_;
  std::size_t rmin_;
  std::vector<ValueInterval> bounds_;
};

struct MinJumps {
  std::size_t k_hat = 0;
  std::vector<std::size_t> prefix_jumps;  // J(p) for prefixes [0, p]
};

namespace detail {

[[noreturn]] inline void throw_infeasible(const ThresholdTable& thr, std::size_t p) {
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "no step function satisfies the constraint at q = %.6g (sample %zu); the smallest attainable "
                "statistic is %.6g",
                thr.q(), p, thr.floor_stat());
  throw InfeasibleError(buf, thr.floor_stat());
}

inline void check_floor(const ThresholdTable& thr) {
  if (thr.min_len() == 1 && !thr.feasible(1)) throw_infeasible(thr, 0);
}

}  // namespace detail

/// Stage 1 only: the minimal number of jumps of every prefix.
template <SegmentModel M>
MinJumps min_jumps(M& model, const ThresholdTable& thr) {
  const std::size_t n = model.size();
  if (thr.n() != n) throw std::invalid_argument("min_jumps: threshold table size mismatch");
  detail::check_floor(thr);
  MinJumps out;
  out.prefix_jumps.resize(n);
  FeasibleBounds<M> fb(model, thr);
  std::size_t last_rmin = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t rmin = fb.advance();
    if (rmin > p) detail::throw_infeasible(thr, p);
    if (rmin < last_rmin) throw std::logic_error("min_jumps: r_min decreased");
    last_rmin = rmin;
    out.prefix_jumps[p] = rmin == 0 ? 0 : out.prefix_jumps[rmin - 1] + 1;
  }
  out.k_hat = out.prefix_jumps[n - 1];
  return out;
}

struct Segmentation {
  std::vector<std::size_t> boundaries;       // segment starts, boundaries[0] == 0
  std::vector<double> values;                // model values per segment
  std::vector<ValueInterval> bounds;         // B over each segment
  std::vector<std::size_t> prefix_jumps;     // J(p), prefix [0, p]
  std::vector<std::size_t> suffix_jumps;     // S(p), suffix [p, n)
  double cost = 0.0;
};

/// Both stages. Among fits with k_hat jumps of minimal cost the one with the
/// lexicographically smallest boundaries, compared from the right, is chosen.
template <SegmentModel M>
Segmentation segment(M& model, const ThresholdTable& thr) {
  const std::size_t n = model.size();
  Segmentation out;
  out.prefix_jumps = min_jumps(model, thr).prefix_jumps;
  const std::size_t K = out.prefix_jumps[n - 1];

  {
    ReversedModel<M> rev(model);
    const MinJumps back = min_jumps(rev, thr);
    out.suffix_jumps.resize(n);
    for (std::size_t p = 0; p < n; ++p) out.suffix_jumps[p] = back.prefix_jumps[n - 1 - p];
  }

  struct State {
    double cost = kInf;
    std::size_t r = 0;
    double value = 0.0;
    ValueInterval bound;
  };
  // States at p carry j in [jlo[p], jhi[p]] jumps; empty when jlo > jhi.
  std::vector<std::size_t> jlo(n);
  std::vector<std::ptrdiff_t> jhi(n);
  std::vector<std::vector<State>> table(n);
  for (std::size_t p = 0; p < n; ++p) {
    jlo[p] = out.prefix_jumps[p];
    jhi[p] = p + 1 == n ? static_cast<std::ptrdiff_t>(K)
                        : static_cast<std::ptrdiff_t>(K) - 1 - static_cast<std::ptrdiff_t>(out.suffix_jumps[p + 1]);
    if (jhi[p] >= static_cast<std::ptrdiff_t>(jlo[p]))
      table[p].resize(static_cast<std::size_t>(jhi[p]) - jlo[p] + 1);
  }

  FeasibleBounds<M> fb(model, thr);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t rmin = fb.advance();
    if (table[p].empty()) continue;
    auto& row = table[p];
    for (std::size_t r = rmin; r <= p; ++r) {
      std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(jlo[p]);
      std::ptrdiff_t hi = jhi[p];
      if (r == 0) {
        hi = std::min<std::ptrdiff_t>(hi, 0);
        lo = std::max<std::ptrdiff_t>(lo, 0);
      } else {
        if (table[r - 1].empty()) continue;
        lo = std::max<std::ptrdiff_t>(lo, static_cast<std::ptrdiff_t>(jlo[r - 1]) + 1);
        hi = std::min<std::ptrdiff_t>(hi, jhi[r - 1] + 1);
      }
      if (lo > hi) continue;
      const ValueInterval& b = fb.bound(r);
      const SegmentOptimum opt = model.optimum(r, p, b);
      for (std::ptrdiff_t j = lo; j <= hi; ++j) {
        const double prev = r == 0 ? 0.0 : table[r - 1][static_cast<std::size_t>(j - 1) - jlo[r - 1]].cost;
        const double c = prev + opt.cost;
        State& s = row[static_cast<std::size_t>(j) - jlo[p]];
        if (c < s.cost) s = {c, r, opt.value, b};
      }
    }
  }

  const State* s = &table[n - 1].back();
  if (!std::isfinite(s->cost)) throw std::logic_error("segment: no fit with the minimal number of jumps");
  out.cost = s->cost;
  std::size_t j = K;
  for (;;) {
    out.boundaries.push_back(s->r);
    out.values.push_back(s->value);
    out.bounds.push_back(s->bound);
    if (s->r == 0) break;
    const std::size_t p = s->r - 1;
    --j;
    s = &table[p][j - jlo[p]];
  }
  std::reverse(out.boundaries.begin(), out.boundaries.end());
  std::reverse(out.values.begin(), out.values.end());
  std::reverse(out.bounds.begin(), out.bounds.end());
  return out;
}

struct FitOptions {
  double min_scale = 0.0;  // 0: every interval length
  PenaltyMode mode = PenaltyMode::sqrt;
};

/// Result of a fit. Step values are natural parameters (data values for
/// quantile fits); values_mean holds the corresponding means.
struct StepFit {
  StepFunction step;
  std::vector<double> values_mean;
  std::vector<ValueInterval> segment_bounds;
  std::size_t k_hat = 0;
  double q_used = 0.0;
  double achieved_stat = 0.0;
  double loglik = 0.0;
  std::vector<std::size_t> prefix_jumps;
  std::vector<std::size_t> suffix_jumps;
  double min_scale = 0.0;
  PenaltyMode mode = PenaltyMode::sqrt;
};

inline MinJumps min_jumps(std::span<const double> y, const ExpFamily& fam, double q, const FitOptions& opt = {}) {
  ExpFamModel model(y, fam);
  return min_jumps(model, ThresholdTable(q, y.size(), opt.min_scale, opt.mode));
}

/// The multiscale-constrained estimator with the minimal number of jumps.
/// Log-likelihoods omit the base-measure term.
inline StepFit fit_smuce(std::span<const double> y, const ExpFamily& fam, double q, const FitOptions& opt = {}) {
  if (y.size() < 1) throw std::invalid_argument("fit_smuce: empty data");
  ExpFamModel model(y, fam);
  const ThresholdTable thr(q, y.size(), opt.min_scale, opt.mode);
  Segmentation seg = segment(model, thr);

  StepFit fit;
  fit.step = StepFunction{y.size(), std::move(seg.boundaries), std::move(seg.values)};
  for (double v : fit.step.values) fit.values_mean.push_back(fam.mean_extended(v));
  fit.segment_bounds = std::move(seg.bounds);
  fit.k_hat = fit.step.jumps();
  fit.q_used = q;
  fit.loglik = -seg.cost;
  fit.prefix_jumps = std::move(seg.prefix_jumps);
  fit.suffix_jumps = std::move(seg.suffix_jumps);
  fit.min_scale = opt.min_scale;
  fit.mode = opt.mode;
  fit.achieved_stat = multiscale_stat(y, fam, fit.step, opt.min_scale, opt.mode);
  return fit;
}

/// Negative log-likelihood of a step function (base-measure term omitted).
inline double step_cost(std::span<const double> y, const ExpFamily& fam, const StepFunction& f) {
  const PrefixSums ps(y);
  double c = 0.0;
  for (std::size_t k = 0; k < f.segments(); ++k) {
    const std::size_t b = f.segment_begin(k);
    const std::size_t e = f.segment_end(k);
    c += fam.segment_cost(fam.clamp_mean(ps.mean(b, e)), e - b, f.values[k]);
  }
  return c;
}

}  // namespace smuce
