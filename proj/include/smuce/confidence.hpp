#pragma once

// Jump-location intervals and a confidence band for the minimal-jump fits.
//
// With J(p) the minimal jump count of the prefix [0, p], let
//   U_k = 1 + max{p : J(p) <= k - 1},   L_k = min{p : [p, U_k] feasible}.
// Any fit with k_hat jumps has its k-th jump (first index of segment k) in
// [L_k, U_k], and segment k covers [U_k, L_{k+1} - 1] (U_0 = 0,
// L_{k_hat+1} = n). On that core every such fit takes a value in
// B[U_k, L_{k+1} - 1]. For x in [L_k, U_k - 1] the fit sits either on
// segment k - 1, which covers [U_{k-1}, x], or on segment k, which covers
// [x, L_{k+1} - 1]; the band there is the hull of the two intersections.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "smuce/expfam.hpp"
#include "smuce/quantile.hpp"
#include "smuce/segdp.hpp"

namespace smuce {

/// Samples [left, right], 0-based inclusive.
struct JumpInterval {
  std::size_t left = 0;
  std::size_t right = 0;
  friend bool operator==(const JumpInterval&, const JumpInterval&) = default;
};

struct ConfidenceRegion {
  std::size_t k_hat = 0;
  std::vector<JumpInterval> jump_intervals;
  std::vector<ValueInterval> band;        // mean space (data space for quantile fits)
  std::vector<ValueInterval> band_theta;  // natural parameter
  double q = 0.0;
  std::optional<double> alpha;
};

/// On-demand recomputation of running intersections over sub-ranges.
template <SegmentModel M>
class BoundsAccess {
 public:
  BoundsAccess(M& model, const ThresholdTable& thr) : model_(&model), thr_(&thr) {}

  /// B[a, x] for x = a..b.
  std::vector<ValueInterval> row(std::size_t a, std::size_t b) {
    std::vector<ValueInterval> out;
    out.reserve(b - a + 1);
    FeasibleBounds<M> fb(*model_, *thr_, a);
    for (std::size_t p = a; p <= b; ++p) {
      const std::size_t rmin = fb.advance();
      out.push_back(rmin <= a ? fb.bound(a) : ValueInterval::empty_set());
    }
    return out;
  }

  /// B[x, b] for x = a..b.
  std::vector<ValueInterval> col(std::size_t a, std::size_t b) {
    FeasibleBounds<M> fb(*model_, *thr_, a);
    for (std::size_t p = a; p <= b; ++p) fb.advance();
    std::vector<ValueInterval> out(b - a + 1, ValueInterval::empty_set());
    for (std::size_t x = std::max(a, fb.r_min()); x <= b; ++x) out[x - a] = fb.bound(x);
    return out;
  }

  /// r_min(p) of the full forward sweep for every p.
  std::vector<std::size_t> sweep_rmin() {
    std::vector<std::size_t> out(model_->size());
    FeasibleBounds<M> fb(*model_, *thr_);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = fb.advance();
    return out;
  }

 private:
  M* model_;
  const ThresholdTable* thr_;
};

/// The interval ends U_1..U_K and L_1..L_K of a fit.
struct JumpEnds {
  std::vector<std::size_t> L;
  std::vector<std::size_t> U;
};

template <SegmentModel M>
JumpEnds jump_ends(const StepFit& fit, BoundsAccess<M>& access) {
  JumpEnds e;
  const auto& J = fit.prefix_jumps;
  if (fit.k_hat == 0) return e;
  const auto rmin = access.sweep_rmin();
  for (std::size_t k = 1; k <= fit.k_hat; ++k) {
    // first p with J(p) > k - 1
    const auto it = std::upper_bound(J.begin(), J.end(), k - 1);
    const std::size_t u = static_cast<std::size_t>(it - J.begin());
    e.U.push_back(u);
    e.L.push_back(rmin[u]);
  }
  return e;
}

template <SegmentModel M>
std::vector<JumpInterval> jump_intervals(const StepFit& fit, BoundsAccess<M>& access) {
  const JumpEnds e = jump_ends(fit, access);
  std::vector<JumpInterval> out;
  for (std::size_t k = 0; k < e.U.size(); ++k) out.push_back({e.L[k], e.U[k]});
  return out;
}

/// Band in the model's value space.
template <SegmentModel M>
std::vector<ValueInterval> confidence_band(const StepFit& fit, BoundsAccess<M>& access, const JumpEnds& e) {
  const std::size_t n = fit.step.n;
  const std::size_t K = fit.k_hat;
  std::vector<ValueInterval> band(n, ValueInterval::empty_set());
  auto U = [&](std::size_t k) { return k == 0 ? std::size_t{0} : e.U[k - 1]; };
  auto L = [&](std::size_t k) { return k == K + 1 ? n : e.L[k - 1]; };

  for (std::size_t j = 0; j <= K; ++j) {
    const std::size_t a = U(j);
    const std::size_t b = L(j + 1) - 1;
    const ValueInterval core = access.row(a, b).back();
    for (std::size_t x = a; x <= b; ++x) band[x] = core;
  }
  for (std::size_t k = 1; k <= K; ++k) {
    if (L(k) >= U(k)) continue;
    const auto left = access.row(U(k - 1), U(k) - 1);    // B[U_{k-1}, x]
    const auto right = access.col(L(k), L(k + 1) - 1);   // B[x, L_{k+1} - 1]
    for (std::size_t x = L(k); x < U(k); ++x)
      band[x] = left[x - U(k - 1)].hull(right[x - L(k)]);
  }
  return band;
}

template <SegmentModel M>
ConfidenceRegion confidence_region(const StepFit& fit, M& model, const ThresholdTable& thr,
                                   const std::function<double(double)>& to_mean) {
  BoundsAccess<M> access(model, thr);
  const JumpEnds e = jump_ends(fit, access);
  ConfidenceRegion region;
  region.k_hat = fit.k_hat;
  region.q = fit.q_used;
  for (std::size_t k = 0; k < e.U.size(); ++k) region.jump_intervals.push_back({e.L[k], e.U[k]});
  region.band_theta = confidence_band(fit, access, e);
  region.band.reserve(region.band_theta.size());
  for (const auto& b : region.band_theta) region.band.push_back({to_mean(b.lower), to_mean(b.upper)});
  return region;
}

/// Confidence region of an exponential-family fit; the data and options must
/// be those the fit was computed from.
inline ConfidenceRegion confidence_region(std::span<const double> y, const ExpFamily& fam, const StepFit& fit) {
  ExpFamModel model(y, fam);
  const ThresholdTable thr(fit.q_used, y.size(), fit.min_scale, fit.mode);
  return confidence_region(fit, model, thr, [&](double t) { return fam.mean_extended(t); });
}

inline ConfidenceRegion quantile_confidence_region(std::span<const double> y, double beta, const StepFit& fit) {
  QuantileModel model(y, beta);
  const ThresholdTable thr(fit.q_used, y.size(), fit.min_scale, fit.mode);
  return confidence_region(fit, model, thr, [](double v) { return v; });
}

}  // namespace smuce
