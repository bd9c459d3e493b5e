// smuce command-line tool.
//
// Exit codes: 0 success, 1 I/O failure, 2 statistically infeasible q,
// 3 invalid arguments.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smuce/io.hpp"
#include "smuce/smuce.hpp"

namespace {

enum Exit { kOk = 0, kIo = 1, kInfeasible = 2, kBadArgs = 3 };

void emit(const std::optional<std::string>& path, const std::string& text) {
  if (path && *path != "-")
    smuce::write_text(*path, text);
  else
    std::cout << text;
}

smuce::NullOptions null_options(unsigned threads, bool allow_large) {
  smuce::NullOptions o;
  o.threads = threads;
  o.allow_large = allow_large;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale change-point inference for exponential-family step functions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", smuce::kVersion);

  // fit
  smuce::FitRequest req;
  std::string fit_input;
  std::optional<std::string> fit_output;
  std::optional<std::string> null_table;
  unsigned threads = 0;
  bool allow_large = false;
  auto* fit = app.add_subcommand("fit", "Fit the minimal-jump multiscale estimator with confidence band");
  fit->add_option("--input", fit_input, "One-column CSV of observations")->required();
  fit->add_option("--output", fit_output, "JSON fit document (default: stdout)");
  fit->add_option("--family", req.family, "gauss-mean | gauss-variance | poisson | bernoulli | quantile")
      ->check(CLI::IsMember({"gauss-mean", "gauss-variance", "poisson", "bernoulli", "quantile"}));
  fit->add_option("--sigma", req.sigma, "Known noise level (gauss-mean)");
  fit->add_option("--quantile-level", req.quantile_level, "Quantile level beta in (0, 1) (quantile)");
  fit->add_option("--ma-beta", req.ma_beta, "MA(1) coefficient of the noise (gauss-mean)");
  auto* o_alpha = fit->add_option("--alpha", req.alpha, "Significance level; q is the (1 - alpha) null quantile");
  auto* o_q = fit->add_option("--q", req.q, "Threshold q");
  auto* o_auto = fit->add_flag("--auto-q", req.auto_q, "Choose q by the worst-case error balance");
  o_alpha->excludes(o_q)->excludes(o_auto);
  o_q->excludes(o_auto);
  fit->add_option("--min-scale", req.min_scale, "Smallest interval length as a fraction of n (0: all)");
  fit->add_option("--null-table", null_table, "Null table file (default: simulate, cached in SMUCE_CACHE_DIR)");
  fit->add_option("--null-reps", req.null_reps, "Monte Carlo replicates of the null table");
  fit->add_option("--seed", req.seed, "Seed of the null table simulation");
  fit->add_option("--mode", req.mode, "Scale calibration: sqrt | loglog | uncalibrated")
      ->check(CLI::IsMember({"sqrt", "loglog", "uncalibrated"}));
  fit->add_option("--threads", threads, "Simulation threads (0: all cores)");
  fit->add_flag("--allow-large", allow_large, "Lift the compute budget of the null simulation");

  // null
  std::size_t null_n = 0, null_reps = smuce::kDefaultNullReps;
  std::uint64_t null_seed = 1;
  double null_min_scale = 0.0;
  std::string null_mode = "sqrt";
  std::optional<std::string> null_out;
  auto* null = app.add_subcommand("null", "Simulate the Gaussian null distribution table");
  null->add_option("--n", null_n, "Sample size")->required();
  null->add_option("--reps", null_reps, "Replicates");
  null->add_option("--seed", null_seed, "Seed");
  null->add_option("--min-scale", null_min_scale, "Smallest interval length as a fraction of n (0: all)");
  null->add_option("--mode", null_mode, "Scale calibration")->check(CLI::IsMember({"sqrt", "loglog", "uncalibrated"}));
  null->add_option("--output", null_out, "Table file (default: stdout)");
  null->add_option("--threads", threads, "Threads (0: all cores)");
  null->add_flag("--allow-large", allow_large, "Lift the compute budget");

  // choose-q
  std::size_t cq_n = 0;
  std::optional<std::string> cq_table, cq_out;
  std::size_t cq_reps = smuce::kDefaultNullReps;
  std::uint64_t cq_seed = 1;
  auto* cq = app.add_subcommand("choose-q", "Threshold maximising the worst-case bound on P(K_hat = K)");
  cq->add_option("--n", cq_n, "Sample size of the data")->required();
  cq->add_option("--table", cq_table, "Null table file (default: simulate at min(n, 3000))");
  cq->add_option("--reps", cq_reps, "Replicates when simulating");
  cq->add_option("--seed", cq_seed, "Seed when simulating");
  cq->add_option("--output", cq_out, "JSON result (default: stdout)");
  cq->add_option("--threads", threads, "Threads (0: all cores)");
  cq->add_flag("--allow-large", allow_large, "Lift the compute budget");

  // band-csv
  std::string bc_fit, bc_input;
  std::optional<std::string> bc_out;
  auto* bc = app.add_subcommand("band-csv", "Plot-ready CSV of data, fit, band and jump intervals");
  bc->add_option("--fit", bc_fit, "Fit document from `smuce fit`")->required();
  bc->add_option("--input", bc_input, "The observations the fit was computed from")->required();
  bc->add_option("--output", bc_out, "CSV file (default: stdout)");

  // simulate
  std::string sc_name;
  std::optional<std::size_t> sc_reps;
  std::optional<std::uint64_t> sc_seed;
  std::optional<std::string> sc_out;
  bool sc_list = false;
  auto* sim = app.add_subcommand("simulate", "Run a built-in simulation scenario");
  sim->add_option("--scenario", sc_name, "Scenario name (see --list)");
  sim->add_option("--reps", sc_reps, "Replicates (default: scenario setting)");
  sim->add_option("--seed", sc_seed, "Seed (default: scenario setting)");
  sim->add_option("--out,--output", sc_out, "JSON report (default: stdout)");
  sim->add_option("--threads", threads, "Threads (0: all cores)");
  sim->add_flag("--list", sc_list, "List scenarios and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadArgs;
  }

  try {
    if (*fit) {
      if (null_table) req.null_table = *null_table;
      req.null_options = null_options(threads, allow_large);
      req.cache_dir = smuce::null_cache_dir();
      const auto y = smuce::read_series(fit_input);
      emit(fit_output, smuce::dump_document(smuce::run_fit(req, y)));
    } else if (*null) {
      const auto t = smuce::simulate_null(null_n, null_reps, null_seed, null_min_scale,
                                          smuce::parse_penalty_mode(null_mode), null_options(threads, allow_large));
      if (null_out && *null_out != "-") {
        smuce::write_null_table(t, *null_out);
      } else {
        std::cout << smuce::null_table_header(t) << '\n';
        char buf[40];
        for (double v : t.samples) {
          std::snprintf(buf, sizeof buf, "%.17g\n", v);
          std::cout << buf;
        }
      }
    } else if (*cq) {
      const smuce::NullTable t =
          cq_table ? smuce::read_null_table(*cq_table)
                   : smuce::cached_null(smuce::default_null_size(cq_n), cq_reps, cq_seed, 0.0, smuce::PenaltyMode::sqrt,
                                        smuce::null_cache_dir(), null_options(threads, allow_large));
      const smuce::QChoice c = smuce::choose_q(cq_n, t);
      nlohmann::ordered_json j;
      j["n"] = cq_n;
      j["table_n"] = t.n;
      j["table_reps"] = t.reps;
      j["table_seed"] = t.seed;
      j["q"] = c.q;
      j["alpha"] = c.alpha;
      j["beta"] = c.beta;
      j["objective"] = c.objective;
      j["lambda_star"] = c.lambda;
      j["eta_star"] = c.eta;
      emit(cq_out, j.dump(2) + "\n");
    } else if (*bc) {
      const auto doc = smuce::parse_document(smuce::read_text(bc_fit));
      const auto y = smuce::read_series(bc_input);
      emit(bc_out, smuce::band_csv(doc, y));
    } else if (*sim) {
      if (sc_list) {
        for (const auto& s : smuce::scenario_registry())
          std::cout << s.name << (s.stand_in ? " [stand-in]" : "") << "  " << s.note << '\n';
        return kOk;
      }
      if (sc_name.empty()) throw std::invalid_argument("--scenario is required");
      smuce::Scenario s = smuce::find_scenario(sc_name);
      if (sc_reps) s.reps = *sc_reps;
      if (sc_seed) s.seed = *sc_seed;
      const auto rep = smuce::run_scenario(s, smuce::null_cache_dir(), threads);
      emit(sc_out, smuce::to_json(rep).dump(2) + "\n");
    }
  } catch (const smuce::InfeasibleError& e) {
    std::cerr << "smuce: " << e.what() << '\n';
    return kInfeasible;
  } catch (const smuce::IoError& e) {
    std::cerr << "smuce: " << e.what() << '\n';
    return kIo;
  } catch (const smuce::ResourceError& e) {
    std::cerr << "smuce: " << e.what() << " (use --allow-large to proceed)\n";
    return kBadArgs;
  } catch (const std::invalid_argument& e) {
    std::cerr << "smuce: " << e.what() << '\n';
    return kBadArgs;
  } catch (const smuce::DomainError& e) {
    std::cerr << "smuce: " << e.what() << '\n';
    return kBadArgs;
  } catch (const std::exception& e) {
    std::cerr << "smuce: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
