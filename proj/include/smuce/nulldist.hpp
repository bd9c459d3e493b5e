#pragma once

// Monte Carlo null distribution of the multiscale statistic: the maximum
// over all discrete intervals of |sum Z| / sqrt(len) - penalty(len, n) for
// iid standard normal Z. Tables are sorted sample vectors with the metadata
// that reproduces them bit for bit.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "smuce/error.hpp"
#include "smuce/expfam.hpp"
#include "smuce/multiscale.hpp"
#include "smuce/rng.hpp"

namespace smuce {

struct NullTable {
  std::size_t n = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  double min_scale = 0.0;  // 0: every interval length
  PenaltyMode mode = PenaltyMode::sqrt;
  std::vector<double> samples;  // ascending

  /// Order statistic with 1-based index ceil(level * reps).
  double quantile(double level) const {
    if (samples.empty()) throw std::invalid_argument("null table is empty");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
    const double pos = std::ceil(level * static_cast<double>(samples.size()) - 1e-9);
    const std::size_t idx = std::clamp<std::size_t>(static_cast<std::size_t>(pos), 1, samples.size());
    return samples[idx - 1];
  }

  /// Fraction of samples >= q.
  double survival(double q) const {
    if (samples.empty()) throw std::invalid_argument("null table is empty");
    const auto it = std::lower_bound(samples.begin(), samples.end(), q);
    return static_cast<double>(samples.end() - it) / static_cast<double>(samples.size());
  }

  friend bool operator==(const NullTable&, const NullTable&) = default;
};

struct NullOptions {
  unsigned threads = 0;            // 0: hardware concurrency
  double compute_budget = 5e10;    // limit on n^2 * reps
  bool allow_large = false;
};

namespace detail {

inline unsigned resolve_threads(unsigned requested, std::size_t work_items) {
  unsigned t = requested == 0 ? std::max(1U, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(1, work_items)));
}

// Runs body(r) for r in [0, count) over `threads` workers, each taking a
// contiguous block of indices.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t r = 0; r < count; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = count * t / threads;
    const std::size_t hi = count * (t + 1) / threads;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t r = lo; r < hi; ++r) body(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline void check_budget(std::size_t n, std::size_t reps, const NullOptions& opt) {
  const double work = static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(reps);
  if (!opt.allow_large && work > opt.compute_budget) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "null simulation needs n^2*reps = %.3g > budget %.3g", work,
                  opt.compute_budget);
    throw ResourceError(buf);
  }
}

// Null statistic of one vector of standard normals.
inline double gaussian_null_stat(const std::vector<double>& cum, std::size_t n, std::size_t min_len,
                                 PenaltyMode mode) {
  double best = -kInf;
  const double* c = cum.data();
  for (std::size_t len = min_len; len <= n; ++len) {
    double lo = kInf;
    double hi = -kInf;
    for (std::size_t i = 0; i + len <= n; ++i) {
      const double s = c[i + len] - c[i];
      lo = s < lo ? s : lo;
      hi = s > hi ? s : hi;
    }
    const double a = std::max(hi, -lo);
    const double T = a * a / (2.0 * static_cast<double>(len));
    best = std::max(best, calibrate(T, scale_term(len, n, mode), mode));
  }
  return best;
}

}  // namespace detail

/// Draws `reps` replicates of the Gaussian null statistic. Replicate r uses
/// StreamRng(seed, r).
inline NullTable simulate_null(std::size_t n, std::size_t reps, std::uint64_t seed,
                               double min_scale = 0.0, PenaltyMode mode = PenaltyMode::sqrt,
                               const NullOptions& opt = {}) {
  if (n < 2) throw std::invalid_argument("simulate_null: n must be at least 2");
  if (reps < 1) throw std::invalid_argument("simulate_null: reps must be positive");
  detail::check_budget(n, reps, opt);
  const std::size_t min_len = min_scale > 0.0 ? min_length(min_scale, n) : 1;

  NullTable table{n, reps, seed, min_scale, mode, std::vector<double>(reps)};
  detail::parallel_for(reps, detail::resolve_threads(opt.threads, reps), [&](std::size_t r) {
    StreamRng rng(seed, r);
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + rng.normal();
    table.samples[r] = detail::gaussian_null_stat(cum, n, min_len, mode);
  });
  std::sort(table.samples.begin(), table.samples.end());
  return table;
}

/// Family-specific finite-sample null: data drawn from F_theta0 and tested
/// against the constant candidate theta0. Not cached.
inline NullTable simulate_null_family(const ExpFamily& fam, double theta0, std::size_t n, std::size_t reps,
                                      std::uint64_t seed, double min_scale = 0.0,
                                      PenaltyMode mode = PenaltyMode::sqrt, const NullOptions& opt = {}) {
  if (n < 2) throw std::invalid_argument("simulate_null_family: n must be at least 2");
  if (reps < 1) throw std::invalid_argument("simulate_null_family: reps must be positive");
  if (!fam.in_theta_domain(theta0)) throw DomainError("simulate_null_family: theta0 outside the parameter space");
  detail::check_budget(n, reps, opt);

  NullTable table{n, reps, seed, min_scale, mode, std::vector<double>(reps)};
  const StepFunction cand{n, {0}, {theta0}};
  detail::parallel_for(reps, detail::resolve_threads(opt.threads, reps), [&](std::size_t r) {
    StreamRng rng(seed, r);
    std::vector<double> y(n);
    for (auto& v : y) v = sample_family(fam, theta0, rng);
    table.samples[r] = multiscale_stat(y, fam, cand, min_scale, mode);
  });
  std::sort(table.samples.begin(), table.samples.end());
  return table;
}

inline std::string null_table_header(const NullTable& t) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "smuce-null v1,n=%zu,reps=%zu,seed=%llu,min_scale=%.17g,mode=%s", t.n, t.reps,
                static_cast<unsigned long long>(t.seed), t.min_scale, to_string(t.mode).c_str());
  return buf;
}

inline void write_null_table(const NullTable& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << null_table_header(t) << '\n';
  char buf[40];
  for (double v : t.samples) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline NullTable read_null_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open null table: " + path.string());
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  NullTable t;
  char mode[32] = {0};
  unsigned long long seed = 0;
  if (std::sscanf(header.c_str(), "smuce-null v1,n=%zu,reps=%zu,seed=%llu,min_scale=%lg,mode=%31s", &t.n,
                  &t.reps, &seed, &t.min_scale, mode) != 5)
    throw IoError(path.string() + ": line 1: not a smuce-null v1 header");
  t.seed = seed;
  try {
    t.mode = parse_penalty_mode(mode);
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": line 1: " + e.what());
  }
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || *end != '\0' || errno == ERANGE)
      throw IoError(path.string() + ": line " + std::to_string(lineno) + ": not a number");
    t.samples.push_back(v);
  }
  if (t.samples.size() != t.reps)
    throw IoError(path.string() + ": header announces " + std::to_string(t.reps) + " samples, found " +
                  std::to_string(t.samples.size()));
  if (!std::is_sorted(t.samples.begin(), t.samples.end()))
    throw IoError(path.string() + ": samples are not sorted");
  return t;
}

/// File name a table is cached under.
inline std::string null_cache_name(std::size_t n, std::size_t reps, std::uint64_t seed, double min_scale,
                                   PenaltyMode mode) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "smuce-null-n%zu-r%zu-s%llu-c%.17g-%s.txt", n, reps,
                static_cast<unsigned long long>(seed), min_scale, to_string(mode).c_str());
  return buf;
}

/// Directory from SMUCE_CACHE_DIR, if set and non-empty.
inline std::optional<std::filesystem::path> null_cache_dir() {
  const char* env = std::getenv("SMUCE_CACHE_DIR");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return std::filesystem::path(env);
}

/// Loads the table from `dir` when present, otherwise simulates it and,
/// if `dir` is given, stores it there.
inline NullTable cached_null(std::size_t n, std::size_t reps, std::uint64_t seed, double min_scale,
                             PenaltyMode mode, const std::optional<std::filesystem::path>& dir,
                             const NullOptions& opt = {}) {
  if (dir) {
    const auto path = *dir / null_cache_name(n, reps, seed, min_scale, mode);
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) {
      NullTable t = read_null_table(path);
      if (t.n == n && t.reps == reps && t.seed == seed && t.min_scale == min_scale && t.mode == mode) return t;
    }
  }
  NullTable t = simulate_null(n, reps, seed, min_scale, mode, opt);
  if (dir) {
    std::error_code ec;
    std::filesystem::create_directories(*dir, ec);
    const auto path = *dir / null_cache_name(n, reps, seed, min_scale, mode);
    const auto tmp = path.string() + ".tmp" + std::to_string(static_cast<unsigned long long>(seed ^ n));
    write_null_table(t, tmp);
    std::filesystem::rename(tmp, path, ec);
  }
  return t;
}

/// Sample size the tables for data of size n are simulated at.
inline std::size_t default_null_size(std::size_t n) { return std::min<std::size_t>(n, 3000); }

inline constexpr std::size_t kDefaultNullReps = 5000;

}  // namespace smuce
