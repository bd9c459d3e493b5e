#pragma once

// Reproducible random streams. Replicate r of a simulation seeded with s
// draws from StreamRng(s, r), so results do not depend on replicate order
// or on how replicates are spread across threads. Gaussian variates use the
// inverse normal cdf (Wichura's AS 241), which needs only log and sqrt; the
// remaining platform dependence is the last-ulp accuracy of std::log.

#include <cmath>
#include <cstdint>

#include "smuce/expfam.hpp"

namespace smuce {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// SplitMix64 generator keyed by (seed, stream).
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream)
      : state_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal();

 private:
  std::uint64_t state_;
};

/// Inverse of the standard normal cdf for p in (0, 1) (AS 241, PPND16).
inline double normal_quantile(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0 ? -val : val;
}

inline double StreamRng::normal() { return normal_quantile(uniform()); }

/// Poisson variate: sequential inversion for small means, Hoermann's
/// transformed rejection (PTRS) otherwise.
inline std::uint64_t poisson_variate(StreamRng& rng, double mu) {
  if (!(mu > 0)) return 0;
  if (mu < 10.0) {
    double p = std::exp(-mu);
    double cdf = p;
    const double u = rng.uniform();
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mu / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  const double slam = std::sqrt(mu);
  const double loglam = std::log(mu);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2 * a / us + b) * u + mu + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mu + k * loglam - std::lgamma(k + 1))
      return static_cast<std::uint64_t>(k);
  }
}

/// One observation of the sufficient statistic from F_theta. For the
/// Gaussian variance family this is Z = Y^2 with Y ~ N(0, m(theta)).
inline double sample_family(const ExpFamily& fam, double theta, StreamRng& rng) {
  switch (fam.kind()) {
    case FamilyKind::gauss_mean: return fam.mean(theta) + fam.sigma() * rng.normal();
    case FamilyKind::gauss_variance: {
      const double y = std::sqrt(fam.mean(theta)) * rng.normal();
      return y * y;
    }
    case FamilyKind::poisson: return static_cast<double>(poisson_variate(rng, fam.mean(theta)));
    case FamilyKind::bernoulli: return rng.uniform() < fam.mean(theta) ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace smuce
