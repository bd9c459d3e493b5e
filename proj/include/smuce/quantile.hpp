#pragma once

// Piecewise-constant beta-quantile regression. A candidate level v on an
// interval turns the data into Bernoulli indicators 1{Y_i <= v}, tested
// against success probability beta. Ties at v may be counted either way, so
// v passes on [i, j] when some count c with #{Y < v} <= c <= #{Y <= v}
// satisfies len * J(c / len, logit beta) within the threshold. The set of
// passing v is [Y_(c_lo), Y_(c_hi + 1)] for the admissible count range
// [c_lo, c_hi] of the window.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "smuce/expfam.hpp"
#include "smuce/multiscale.hpp"
#include "smuce/segdp.hpp"

namespace smuce {

namespace detail {

// Fenwick tree over ranks holding counts and value sums.
class RankTree {
 public:
  explicit RankTree(std::size_t n) : cnt_(n + 1, 0), sum_(n + 1, 0.0), top_(1) {
    while (top_ * 2 <= n) top_ *= 2;
  }

  void update(std::size_t rank, int dc, double dv) {
    for (std::size_t i = rank + 1; i < cnt_.size(); i += i & (~i + 1)) {
      cnt_[i] += dc;
      sum_[i] += dv;
    }
  }

  // Count and sum over ranks [0, rank).
  std::pair<long, double> prefix(std::size_t rank) const {
    long c = 0;
    double s = 0.0;
    for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) {
      c += cnt_[i];
      s += sum_[i];
    }
    return {c, s};
  }

  // Rank of the k-th present element (k >= 1).
  std::size_t kth(long k) const {
    std::size_t pos = 0;
    for (std::size_t step = top_; step > 0; step /= 2) {
      if (pos + step < cnt_.size() && cnt_[pos + step] < k) {
        pos += step;
        k -= cnt_[pos];
      }
    }
    return pos;
  }

 private:
  std::vector<long> cnt_;
  std::vector<double> sum_;
  std::size_t top_;
};

}  // namespace detail

/// Admissible counts for one window length.
struct CountRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  bool empty = false;
};

/// Integer counts c in [0, len] with len * J(c / len, logit beta) <= len * t.
/// J is convex in c, so the set is a contiguous run around beta * len.
inline CountRange bernoulli_count_range(double beta, std::size_t len, double t) {
  if (t == kInf) return {0, len, false};
  const ExpFamily bern = ExpFamily::bernoulli();
  const double theta = std::log(beta) - std::log1p(-beta);
  const double dl = static_cast<double>(len);
  auto ok = [&](std::size_t c) { return bern.divergence(static_cast<double>(c) / dl, theta) <= t; };
  const std::size_t f = std::min(len, static_cast<std::size_t>(std::floor(beta * dl)));
  const std::size_t c0 = ok(f) ? f : (f + 1 <= len && ok(f + 1) ? f + 1 : len + 1);
  if (c0 > len) return {0, 0, true};
  std::size_t a = 0, b = c0;  // first passing count in [a, b]
  while (a < b) {
    const std::size_t m = a + (b - a) / 2;
    if (ok(m)) b = m;
    else a = m + 1;
  }
  const std::size_t lo = a;
  a = c0;
  b = len;  // last passing count in [a, b]
  while (a < b) {
    const std::size_t m = a + (b - a + 1) / 2;
    if (ok(m)) a = m;
    else b = m - 1;
  }
  return {lo, a, false};
}

/// Segment model for quantile regression; values live in data space.
class QuantileModel {
 public:
  QuantileModel(std::span<const double> y, double beta) : y_(y.begin(), y.end()), beta_(beta), tree_(y.size()) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
    for (std::size_t i = 0; i < y_.size(); ++i)
      if (!std::isfinite(y_[i])) throw DomainError("quantile: non-finite observation");
    order_.resize(y_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return y_[a] < y_[b]; });
    rank_.resize(y_.size());
    sorted_.resize(y_.size());
    for (std::size_t k = 0; k < order_.size(); ++k) {
      rank_[order_[k]] = k;
      sorted_[k] = y_[order_[k]];
    }
  }

  std::size_t size() const { return y_.size(); }
  double beta() const { return beta_; }

  ValueInterval restrict(std::size_t i, std::size_t j, double t, ValueInterval cur) {
    if (cur.empty() || t == kInf) return cur;
    const std::size_t len = j - i + 1;
    const CountRange cr = counts(len, t);
    if (cr.empty) return ValueInterval::empty_set();
    window(i, j);
    const double lower = cr.lo == 0 ? -kInf : order_stat(cr.lo);
    const double upper = cr.hi >= len ? kInf : order_stat(cr.hi + 1);
    return cur.intersect({lower, upper});
  }

  /// Quantile Y_(ceil(beta len)) of the window clamped into b, with its
  /// check loss.
  SegmentOptimum optimum(std::size_t i, std::size_t j, ValueInterval b) {
    window(i, j);
    const std::size_t len = j - i + 1;
    const double pos = std::ceil(beta_ * static_cast<double>(len) - 1e-12);
    const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(pos, 1.0)), 1, len);
    const double v = b.clamp(order_stat(k));
    return {v, check_loss(v)};
  }

 private:
  CountRange counts(std::size_t len, double t) {
    if (cache_.size() <= len) cache_.resize(len + 1);
    auto& slot = cache_[len];
    if (!slot || slot->first != t) slot = std::make_pair(t, bernoulli_count_range(beta_, len, t));
    return slot->second;
  }

  void add(std::size_t i) { tree_.update(rank_[i], +1, y_[i]); }
  void remove(std::size_t i) { tree_.update(rank_[i], -1, -y_[i]); }

  // Moves the tracked window to [i, j].
  void window(std::size_t i, std::size_t j) {
    if (!has_window_ || j < wl_ || i > wr_) {
      if (has_window_)
        for (std::size_t k = wl_; k <= wr_; ++k) remove(k);
      for (std::size_t k = i; k <= j; ++k) add(k);
      wl_ = i;
      wr_ = j;
      has_window_ = true;
      return;
    }
    while (wl_ > i) add(--wl_);
    while (wr_ < j) add(++wr_);
    while (wl_ < i) remove(wl_++);
    while (wr_ > j) remove(wr_--);
  }

  double order_stat(std::size_t k) const { return sorted_[tree_.kth(static_cast<long>(k))]; }

  double check_loss(double v) const {
    const std::size_t r = static_cast<std::size_t>(std::upper_bound(sorted_.begin(), sorted_.end(), v) - sorted_.begin());
    const auto [c_le, s_le] = tree_.prefix(r);
    const auto [c_all, s_all] = tree_.prefix(sorted_.size());
    const double below = static_cast<double>(c_le) * v - s_le;
    const double above = (s_all - s_le) - static_cast<double>(c_all - c_le) * v;
    return (1.0 - beta_) * below + beta_ * above;
  }

  std::vector<double> y_;
  double beta_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> rank_;
  std::vector<double> sorted_;
  detail::RankTree tree_;
  std::vector<std::optional<std::pair<double, CountRange>>> cache_;  // keyed by threshold
  bool has_window_ = false;
  std::size_t wl_ = 0;
  std::size_t wr_ = 0;
};

/// Multiscale statistic of a data-space step function under the Bernoulli
/// transform at level beta.
inline double quantile_multiscale_stat(std::span<const double> y, double beta, const StepFunction& cand,
                                       double min_scale = 0.0, PenaltyMode mode = PenaltyMode::sqrt) {
  const std::size_t n = y.size();
  if (cand.n != n) throw std::invalid_argument("quantile_multiscale_stat: candidate length mismatch");
  cand.validate();
  const ExpFamily bern = ExpFamily::bernoulli();
  const double theta = std::log(beta) - std::log1p(-beta);
  const std::size_t min_len = min_scale > 0.0 ? min_length(min_scale, n) : 1;
  double best = -kInf;
  for (std::size_t k = 0; k < cand.segments(); ++k) {
    const std::size_t b = cand.segment_begin(k);
    const std::size_t e = cand.segment_end(k);
    const double v = cand.values[k];
    for (std::size_t i = b; i < e; ++i) {
      std::size_t less = 0, leq = 0;
      for (std::size_t j = i; j < e; ++j) {
        less += y[j] < v;
        leq += y[j] <= v;
        const std::size_t len = j - i + 1;
        if (len < min_len) continue;
        const double dl = static_cast<double>(len);
        const double target = beta * dl;
        const std::size_t f = std::clamp(static_cast<std::size_t>(std::floor(target)), less, leq);
        const std::size_t c = std::clamp(static_cast<std::size_t>(std::ceil(target)), less, leq);
        const double J = std::min(bern.divergence(static_cast<double>(f) / dl, theta),
                                  bern.divergence(static_cast<double>(c) / dl, theta));
        best = std::max(best, calibrate(dl * J, scale_term(len, n, mode), mode));
      }
    }
  }
  return best;
}

/// Total check loss of a data-space step function.
inline double quantile_cost(std::span<const double> y, double beta, const StepFunction& f) {
  double c = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - f.value_at(i);
    c += d > 0 ? beta * d : (beta - 1.0) * d;
  }
  return c;
}

/// Minimal-jump quantile fit. loglik is minus the total check loss.
inline StepFit fit_quantile(std::span<const double> y, double beta, double q, const FitOptions& opt = {}) {
  if (y.empty()) throw std::invalid_argument("fit_quantile: empty data");
  QuantileModel model(y, beta);
  const ThresholdTable thr(q, y.size(), opt.min_scale, opt.mode);
  Segmentation seg = segment(model, thr);
  StepFit fit;
  fit.step = StepFunction{y.size(), std::move(seg.boundaries), std::move(seg.values)};
  fit.values_mean = fit.step.values;
  fit.segment_bounds = std::move(seg.bounds);
  fit.k_hat = fit.step.jumps();
  fit.q_used = q;
  fit.loglik = -seg.cost;
  fit.prefix_jumps = std::move(seg.prefix_jumps);
  fit.suffix_jumps = std::move(seg.suffix_jumps);
  fit.min_scale = opt.min_scale;
  fit.mode = opt.mode;
  fit.achieved_stat = quantile_multiscale_stat(y, beta, fit.step, opt.min_scale, opt.mode);
  return fit;
}

}  // namespace smuce
