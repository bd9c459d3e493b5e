#pragma once

// Series input, JSON fit documents and plot-ready CSV output.

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
#include <vector>

#include <nlohmann/json.hpp>

#include "smuce/confidence.hpp"
#include "smuce/error.hpp"
#include "smuce/experiments.hpp"
#include "smuce/quantile.hpp"
#include "smuce/segdp.hpp"
#include "smuce/tuning.hpp"

namespace smuce {

inline constexpr const char* kVersion = "1.0.0";

/// Parses one-column CSV text; an optional first line `value` is a header.
inline std::vector<double> parse_series(const std::string& text, const std::string& origin = "input") {
  std::vector<double> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t");
    const std::string cell = line.substr(b, e - b + 1);
    if (lineno == 1 && (cell == "value" || cell == "\"value\"")) continue;
    if (cell.find(',') != std::string::npos)
      throw IoError(origin + ": line " + std::to_string(lineno) + ": expected a single column");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
      throw IoError(origin + ": line " + std::to_string(lineno) + ": not a number: '" + cell + "'");
    if (!std::isfinite(v) || errno == ERANGE)
      throw IoError(origin + ": line " + std::to_string(lineno) + ": value must be finite");
    out.push_back(v);
  }
  if (out.size() < 2) throw IoError(origin + ": at least 2 observations required, found " + std::to_string(out.size()));
  return out;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<double> read_series(const std::filesystem::path& path) {
  return parse_series(read_text(path), path.string());
}

struct SegmentRecord {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  double value_mean = 0.0;
  double value_theta = 0.0;
  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

struct BandRecord {
  std::size_t index = 0;
  double lower = 0.0;
  double upper = 0.0;
  friend bool operator==(const BandRecord&, const BandRecord&) = default;
};

struct FitDocument {
  std::size_t n = 0;
  std::string family;
  std::optional<double> quantile_level;
  std::optional<double> sigma;
  std::optional<double> ma_beta;
  double q = 0.0;
  std::optional<double> alpha;
  double min_scale = 0.0;
  std::string mode = "sqrt";
  std::size_t k_hat = 0;
  std::vector<SegmentRecord> segments;
  std::vector<JumpInterval> jump_intervals;
  std::vector<BandRecord> band;
  double achieved_stat = 0.0;
  std::string version = kVersion;
  std::optional<std::uint64_t> seed;
  friend bool operator==(const FitDocument&, const FitDocument&) = default;
};

inline FitDocument make_document(const StepFit& fit, const ConfidenceRegion& region, const std::string& family) {
  FitDocument d;
  d.n = fit.step.n;
  d.family = family;
  d.q = fit.q_used;
  d.alpha = region.alpha;
  d.min_scale = fit.min_scale;
  d.mode = to_string(fit.mode);
  d.k_hat = fit.k_hat;
  for (std::size_t k = 0; k < fit.step.segments(); ++k)
    d.segments.push_back({fit.step.segment_begin(k), fit.step.segment_end(k), fit.values_mean[k], fit.step.values[k]});
  d.jump_intervals = region.jump_intervals;
  for (std::size_t i = 0; i < region.band.size(); ++i) d.band.push_back({i, region.band[i].lower, region.band[i].upper});
  d.achieved_stat = fit.achieved_stat;
  return d;
}

namespace detail {

inline nlohmann::ordered_json real_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double real_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::nan("");
  }
  throw IoError("expected a number");
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const FitDocument& d) {
  using detail::real_to_json;
  nlohmann::ordered_json j;
  j["version"] = d.version;
  j["n"] = d.n;
  j["family"] = d.family;
  if (d.quantile_level) j["quantile_level"] = *d.quantile_level;
  if (d.sigma) j["sigma"] = *d.sigma;
  if (d.ma_beta) j["ma_beta"] = *d.ma_beta;
  j["q"] = real_to_json(d.q);
  j["alpha"] = d.alpha ? nlohmann::ordered_json(*d.alpha) : nlohmann::ordered_json(nullptr);
  j["min_scale"] = d.min_scale;
  j["mode"] = d.mode;
  j["k_hat"] = d.k_hat;
  j["achieved_stat"] = real_to_json(d.achieved_stat);
  j["seed"] = d.seed ? nlohmann::ordered_json(*d.seed) : nlohmann::ordered_json(nullptr);
  auto& segs = j["segments"] = nlohmann::ordered_json::array();
  for (const auto& s : d.segments)
    segs.push_back({{"start", s.start}, {"end", s.end}, {"value_mean", real_to_json(s.value_mean)},
                    {"value_theta", real_to_json(s.value_theta)}});
  auto& ji = j["jump_intervals"] = nlohmann::ordered_json::array();
  for (const auto& v : d.jump_intervals) ji.push_back({{"left", v.left}, {"right", v.right}});
  auto& band = j["band"] = nlohmann::ordered_json::array();
  for (const auto& b : d.band)
    band.push_back({{"index", b.index}, {"lower", real_to_json(b.lower)}, {"upper", real_to_json(b.upper)}});
  return j;
}

inline FitDocument fit_document_from_json(const nlohmann::json& j) {
  using detail::real_from_json;
  try {
    FitDocument d;
    d.version = j.at("version").get<std::string>();
    d.n = j.at("n").get<std::size_t>();
    d.family = j.at("family").get<std::string>();
    if (j.contains("quantile_level")) d.quantile_level = j["quantile_level"].get<double>();
    if (j.contains("sigma")) d.sigma = j["sigma"].get<double>();
    if (j.contains("ma_beta")) d.ma_beta = j["ma_beta"].get<double>();
    d.q = real_from_json(j.at("q"));
    if (!j.at("alpha").is_null()) d.alpha = j["alpha"].get<double>();
    d.min_scale = j.at("min_scale").get<double>();
    d.mode = j.at("mode").get<std::string>();
    d.k_hat = j.at("k_hat").get<std::size_t>();
    d.achieved_stat = real_from_json(j.at("achieved_stat"));
    if (!j.at("seed").is_null()) d.seed = j["seed"].get<std::uint64_t>();
    for (const auto& s : j.at("segments"))
      d.segments.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
                            real_from_json(s.at("value_mean")), real_from_json(s.at("value_theta"))});
    for (const auto& v : j.at("jump_intervals"))
      d.jump_intervals.push_back({v.at("left").get<std::size_t>(), v.at("right").get<std::size_t>()});
    for (const auto& b : j.at("band"))
      d.band.push_back({b.at("index").get<std::size_t>(), real_from_json(b.at("lower")), real_from_json(b.at("upper"))});
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed fit document: ") + e.what());
  }
}

inline std::string dump_document(const FitDocument& d) { return to_json(d).dump(2) + "\n"; }

inline FitDocument parse_document(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("fit document is not valid JSON: ") + e.what());
  }
  return fit_document_from_json(j);
}

/// Everything `smuce fit` needs besides the data. Exactly one of alpha, q
/// and auto_q selects the threshold.
struct FitRequest {
  std::string family = "gauss-mean";
  std::optional<double> sigma;
  std::optional<double> quantile_level;
  std::optional<double> ma_beta;
  std::optional<double> alpha;
  std::optional<double> q;
  bool auto_q = false;
  double min_scale = 0.0;
  std::string mode = "sqrt";
  std::optional<std::filesystem::path> null_table;
  std::size_t null_reps = kDefaultNullReps;
  std::uint64_t seed = 1;
  NullOptions null_options;
  std::optional<std::filesystem::path> cache_dir;
};

inline void validate(const FitRequest& r) {
  const int chosen = (r.alpha ? 1 : 0) + (r.q ? 1 : 0) + (r.auto_q ? 1 : 0);
  if (chosen != 1) throw std::invalid_argument("exactly one of --alpha, --q, --auto-q is required");
  if (r.alpha && !(*r.alpha > 0.0 && *r.alpha < 1.0)) throw std::invalid_argument("--alpha must lie in (0, 1)");
  if (r.family == "gauss-mean" && !r.sigma) throw std::invalid_argument("gauss-mean requires --sigma");
  if (r.family == "quantile" && !r.quantile_level) throw std::invalid_argument("quantile requires --quantile-level");
  if (r.family != "gauss-mean" && r.ma_beta) throw std::invalid_argument("--ma-beta applies to gauss-mean only");
  if (r.family != "quantile" && r.quantile_level)
    throw std::invalid_argument("--quantile-level applies to the quantile family only");
  if (r.family != "gauss-mean" && r.sigma) throw std::invalid_argument("--sigma applies to gauss-mean only");
  if (r.min_scale < 0.0 || r.min_scale > 1.0) throw std::invalid_argument("--min-scale must lie in [0, 1]");
  parse_penalty_mode(r.mode);
}

/// Null table for a request on data of size n: the given file, or the
/// cached / simulated Gaussian table at min(n, 3000).
inline NullTable request_table(const FitRequest& r, std::size_t n) {
  if (r.null_table) return read_null_table(*r.null_table);
  return cached_null(default_null_size(n), r.null_reps, r.seed, r.min_scale, parse_penalty_mode(r.mode), r.cache_dir,
                     r.null_options);
}

/// The `smuce fit` pipeline on raw observations (the Gaussian variance
/// family squares them here).
inline FitDocument run_fit(const FitRequest& req, const std::vector<double>& raw) {
  validate(req);
  if (raw.size() < 2) throw std::invalid_argument("at least 2 observations required");
  const PenaltyMode mode = parse_penalty_mode(req.mode);
  double q = 0.0;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  if (req.q) {
    q = *req.q;
  } else {
    const NullTable table = request_table(req, raw.size());
    seed = table.seed;
    if (req.alpha) {
      q = table.quantile(1.0 - *req.alpha);
      alpha = *req.alpha;
    } else {
      const QChoice c = choose_q(raw.size(), table);
      q = c.q;
      alpha = c.alpha;
    }
  }
  const FitOptions opt{req.min_scale, mode};
  FitDocument doc;
  if (req.family == "quantile") {
    const StepFit fit = fit_quantile(raw, *req.quantile_level, q, opt);
    ConfidenceRegion region = quantile_confidence_region(raw, *req.quantile_level, fit);
    region.alpha = alpha;
    doc = make_document(fit, region, req.family);
    doc.quantile_level = req.quantile_level;
  } else {
    const ExpFamily fam = ExpFamily::from_name(req.family, req.sigma.value_or(1.0), req.ma_beta.value_or(0.0));
    std::vector<double> y = raw;
    if (fam.kind() == FamilyKind::gauss_variance)
      for (auto& v : y) v *= v;
    const StepFit fit = fit_smuce(y, fam, q, opt);
    ConfidenceRegion region = confidence_region(y, fam, fit);
    region.alpha = alpha;
    doc = make_document(fit, region, req.family);
    doc.sigma = req.sigma;
    doc.ma_beta = req.ma_beta;
  }
  doc.seed = seed;
  return doc;
}

namespace detail {

inline std::string fmt_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// CSV with columns index,y,fit_mean,band_lower,band_upper,jump_interval_flag.
inline std::string band_csv(const FitDocument& d, const std::vector<double>& y) {
  if (y.size() != d.n) throw IoError("band-csv: data length does not match the fit document");
  std::vector<double> fit(d.n, 0.0);
  for (const auto& s : d.segments)
    for (std::size_t i = s.start; i < s.end && i < d.n; ++i) fit[i] = s.value_mean;
  std::vector<int> flag(d.n, 0);
  for (const auto& ji : d.jump_intervals)
    for (std::size_t i = ji.left; i <= ji.right && i < d.n; ++i) flag[i] = 1;
  std::ostringstream out;
  out << "index,y,fit_mean,band_lower,band_upper,jump_interval_flag\n";
  for (std::size_t i = 0; i < d.n; ++i) {
    const double lo = i < d.band.size() ? d.band[i].lower : std::nan("");
    const double hi = i < d.band.size() ? d.band[i].upper : std::nan("");
    out << i << ',' << detail::fmt_real(y[i]) << ',' << detail::fmt_real(fit[i]) << ',' << detail::fmt_real(lo) << ','
        << detail::fmt_real(hi) << ',' << flag[i] << '\n';
  }
  return out.str();
}

inline nlohmann::ordered_json to_json(const ScenarioReport& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.name;
  j["n"] = r.n;
  j["true_jumps"] = r.K;
  j["reps"] = r.reps;
  j["seed"] = r.seed;
  j["level"] = r.level;
  j["q"] = r.q;
  j["stand_in"] = r.stand_in;
  auto& freq = j["k_diff_freq"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.k_diff_freq) freq[(k > 0 ? "+" : "") + std::to_string(k)] = v;
  j["mise"] = r.mise;
  j["miae"] = r.miae;
  j["coverage"] = r.coverage;
  j["freq_k_correct"] = r.freq_k_correct;
  j["coverage_given_k"] = r.coverage_given_k;
  j["freq_k_at_least"] = r.freq_k_at_least;
  j["freq_detect"] = r.freq_detect;
  j["version"] = kVersion;
  return j;
}

}  // namespace smuce
