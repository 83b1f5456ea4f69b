#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "selfcal/downlink.hpp"
#include "selfcal/estimators.hpp"
#include "selfcal/fisher.hpp"
#include "selfcal/montecarlo.hpp"
#include "selfcal/rfmodel.hpp"
#include "selfcal/rng.hpp"
#include "selfcal/topology.hpp"

namespace {

using nlohmann::json;
using namespace selfcal;

constexpr int kExitError = 1;
constexpr int kExitExclusions = 2;

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string output;
  std::string format = "csv";
  int threads = -1;  // unset; resolution order: flag > config > env > auto
  std::string config_path;
  double max_exclusion_rate = 0.001;
};

// Registers options so that values from a JSON config file fill in anything
// the command line left unset (flags always win).
class Binder {
 public:
  explicit Binder(CLI::App* cmd) : cmd_(cmd) {}

  template <typename T>
  CLI::Option* bind(const std::string& flag, T& var, const std::string& desc) {
    CLI::Option* opt = cmd_->add_option(flag, var, desc);
    opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    appliers_.push_back({key_of(flag), opt, [&var](const json& v) { var = v.get<T>(); }});
    return opt;
  }

  void apply_config(const json& config) {
    for (const auto& entry : appliers_) {
      if (entry.opt->count() > 0 || !config.contains(entry.key)) continue;
      try {
        entry.apply(config.at(entry.key));
      } catch (const json::exception& e) {
        throw StructuralError("config key \"" + entry.key + "\": " + e.what());
      }
    }
    for (const auto& [key, value] : config.items()) {
      bool known = false;
      for (const auto& entry : appliers_)
        if (entry.key == key) known = true;
      if (!known) throw StructuralError("config key \"" + key + "\" is not a flag of this command");
    }
  }

 private:
  struct Applier {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> apply;
  };

  static std::string key_of(const std::string& flag) {
    std::string first = flag.substr(0, flag.find(','));
    while (!first.empty() && first.front() == '-') first.erase(first.begin());
    return first;
  }

  CLI::App* cmd_;
  std::vector<Applier> appliers_;
};

void add_globals(Binder& bind, GlobalOpts& g) {
  bind.bind("--seed", g.seed, "Base seed; all randomness derives from it");
  bind.bind("--output,-o", g.output, "Output file (stdout if omitted)");
  bind.bind("--format", g.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));
  bind.bind("--threads", g.threads,
            "Worker threads (0 = all cores; default from SELFCAL_THREADS)");
  bind.bind("--max-exclusion-rate", g.max_exclusion_rate,
            "Largest tolerated excluded-trial fraction for exit code 0");
  // --config is applied before the other bindings are merged, so it is a
  // plain option rather than a bound one.
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  json j = json::parse(buffer.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw StructuralError("config file must hold a JSON object: " + path);
  return j;
}

int resolve_threads(const GlobalOpts& g) {
  if (g.threads >= 0) return g.threads;
  if (const char* env = std::getenv("SELFCAL_THREADS")) {
    try {
      return std::max(0, std::stoi(env));
    } catch (const std::exception&) {
      throw StructuralError(std::string("SELFCAL_THREADS is not an integer: ") + env);
    }
  }
  return 0;  // auto
}

std::vector<double> parse_snr_grid(const std::string& text) {
  std::vector<double> grid;
  if (text.find(':') != std::string::npos) {
    double lo = 0, hi = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !in.eof())
      throw StructuralError("bad SNR grid \"" + text + "\": expected lo:hi:step");
    if (!(step > 0.0) || hi < lo)
      throw StructuralError("bad SNR grid \"" + text + "\": need step > 0 and hi >= lo");
    for (double v = lo; v <= hi + 1e-9; v += step) grid.push_back(v);
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t comma = std::min(text.find(',', pos), text.size());
      const std::string part = text.substr(pos, comma - pos);
      try {
        std::size_t used = 0;
        const double v = std::stod(part, &used);
        if (used != part.size()) throw std::invalid_argument(part);
        grid.push_back(v);
      } catch (const std::exception&) {
        throw StructuralError("bad SNR value \"" + part + "\" in grid \"" + text + "\"");
      }
      pos = comma + 1;
    }
  }
  if (grid.empty()) throw StructuralError("empty SNR grid");
  return grid;
}

std::vector<StrategySpec> parse_strategy_list(const std::string& text) {
  std::vector<StrategySpec> specs;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    specs.push_back(parse_strategy_spec(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return specs;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructuralError("cannot open file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StructuralError("cannot open output file: " + path);
  out << payload;
  if (!out) throw StructuralError("failed writing output file: " + path);
}

void emit(const GlobalOpts& g, const std::string& command, const std::string& payload,
          const json& resolved, const json& diagnostics) {
  if (g.output.empty()) {
    std::cout << payload;
    return;
  }
  write_file(g.output, payload);
  json meta;
  meta["command"] = command;
  meta["config"] = resolved;
  meta["diagnostics"] = diagnostics;
  write_file(g.output + ".meta.json", meta.dump(2) + "\n");
}

json json_of_string_output(const std::string& text) { return json::parse(text); }

// ---------------------------------------------------------------------------
// crlb

int cmd_crlb(const GlobalOpts& g, int M, int f, double a, double b, double snr_db,
             const std::string& strategy_text) {
  const StrategySpec spec = parse_strategy_spec(strategy_text);
  const InterconnectionStrategy strategy = realize(spec, M, f);
  if (!validate_effective(strategy))
    throw StructuralError("strategy is not effective: some antenna cannot reach the reference");

  ChannelModel channel;
  channel.sigma_n_sq = snr_to_noise_variance(snr_db, a, b, channel.line_gain);
  const RfGainSet gains = generate_gains(M, f, a, b, derive(g.seed, {0x1}));
  const FisherMatrix fim = build_fim(gains, strategy, channel);
  const CrlbReport numerical = crlb_numerical(fim, gains);

  bool tree = is_tree(strategy);
  CrlbReport closed;
  double discrepancy = 0.0;
  if (tree) {
    closed = crlb_closed_form(compute_paths(strategy), a, b, channel);
    for (int m = 1; m <= M; ++m) {
      if (m == f) continue;
      discrepancy = std::max(
          discrepancy,
          std::abs(numerical.crlb_alpha[m] - closed.crlb_alpha[m]) / closed.crlb_alpha[m]);
      discrepancy = std::max(
          discrepancy,
          std::abs(numerical.crlb_beta[m] - closed.crlb_beta[m]) / closed.crlb_beta[m]);
      discrepancy = std::max(discrepancy,
                             std::abs(numerical.crlb_relative[m] - closed.crlb_relative[m]) /
                                 closed.crlb_relative[m]);
    }
  }

  json resolved{{"strategy", spec.label()}, {"M", M},       {"f", f},
                {"a", a},                   {"b", b},       {"snr_db", snr_db},
                {"seed", g.seed},           {"format", g.format}};
  json diagnostics{{"is_tree", tree},
                   {"condition_number", numerical.condition_number},
                   {"trace_objective", numerical.trace_objective}};
  if (tree) diagnostics["max_relative_discrepancy"] = discrepancy;

  std::string payload;
  if (g.format == "csv") {
    payload = crlb_report_to_csv(numerical);
  } else {
    json out;
    out["numerical"] = json_of_string_output(crlb_report_to_json(numerical));
    out["closed_form"] =
        tree ? json_of_string_output(crlb_report_to_json(closed)) : json();
    out["max_relative_discrepancy"] = tree ? json(discrepancy) : json();
    payload = out.dump(2) + "\n";
  }
  emit(g, "crlb", payload, resolved, diagnostics);
  return 0;
}

// ---------------------------------------------------------------------------
// verify-optimality

int cmd_verify_optimality(const GlobalOpts& g, int M, int f, double a, double b,
                          double snr_db) {
  ChannelModel channel;
  channel.sigma_n_sq = snr_to_noise_variance(snr_db, a, b, channel.line_gain);

  SpanningTreeEnumerator trees(M, f);
  const InterconnectionStrategy star = build_star(M, f);
  double min_trace = 0.0;
  std::uint64_t argmin_index = 0;
  long minimizers = 0;
  bool argmin_is_star = false;
  std::string rows = "tree_index,trace_objective,is_star\n";

  std::uint64_t index = 0;
  while (auto tree = trees.next()) {
    const CrlbReport report = crlb_closed_form(compute_paths(*tree), a, b, channel);
    const bool star_tree = *tree == star;
    rows += std::to_string(index) + ',' + fmt_double(report.trace_objective) + ',' +
            (star_tree ? "1" : "0") + '\n';
    if (index == 0 || report.trace_objective < min_trace) {
      min_trace = report.trace_objective;
      argmin_index = index;
      argmin_is_star = star_tree;
      minimizers = 1;
    } else if (report.trace_objective == min_trace) {
      ++minimizers;
    }
    ++index;
  }

  const InterconnectionStrategy argmin =
      SpanningTreeEnumerator::from_index(M, f, argmin_index);
  json argmin_edges = json::array();
  for (const auto& [p, q] : argmin.edges()) argmin_edges.push_back({p, q});

  json summary{{"total_trees", trees.total()},
               {"min_trace", min_trace},
               {"argmin_index", argmin_index},
               {"argmin_edges", argmin_edges},
               {"argmin_is_star", argmin_is_star},
               {"unique_minimizer", minimizers == 1}};
  json resolved{{"M", M}, {"f", f}, {"a", a}, {"b", b},
                {"snr_db", snr_db}, {"format", g.format}};

  std::string payload;
  if (g.format == "csv") {
    payload = rows;
  } else {
    payload = summary.dump(2) + "\n";
  }
  emit(g, "verify-optimality", payload, resolved, summary);
  if (!argmin_is_star || minimizers != 1) {
    std::cerr << "verify-optimality: star is not the unique trace minimizer\n";
    return kExitError;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(const GlobalOpts& g, const SweepConfig& config) {
  const SweepResult result = run_sweep(config);

  long included = 0, excluded = 0;
  for (const SweepCell& cell : result.cells) {
    included += cell.trials;
    excluded += cell.exclusions;
  }
  const double rate =
      included + excluded > 0 ? double(excluded) / double(included + excluded) : 0.0;

  json strategies = json::array();
  for (const StrategySpec& spec : config.strategies) strategies.push_back(spec.label());
  json resolved{{"M", config.antenna_count},
                {"f", config.reference},
                {"strategies", strategies},
                {"snr_grid_db", config.snr_grid_db},
                {"trials", config.trials},
                {"sigma_h_sq", config.sigma_h_sq},
                {"a", config.a},
                {"b", config.b},
                {"mode", mode_name(config.mode)},
                {"persistence",
                 config.persistence == DistortionPersistence::PerTrial ? "trial"
                                                                       : "deployment"},
                {"seed", config.base_seed},
                {"threads", config.threads},
                {"format", g.format},
                {"max_exclusion_rate", g.max_exclusion_rate}};

  json ordering = json::array();
  for (const OrderingRow& row : compare_strategies(result)) {
    ordering.push_back({{"snr_db", row.snr_db},
                        {"by_mse", row.by_mse},
                        {"by_crlb", row.by_crlb},
                        {"inversion", row.inversion}});
  }
  json diagnostics{{"exclusion_rate", rate},
                   {"excluded_trials", excluded},
                   {"included_trials", included},
                   {"ordering", ordering}};

  const std::string payload =
      g.format == "csv" ? sweep_to_csv(result) : sweep_to_json(result);
  emit(g, "sweep", payload, resolved, diagnostics);
  if (rate > g.max_exclusion_rate) {
    std::cerr << "sweep: excluded-trial rate " << rate << " exceeds "
              << g.max_exclusion_rate << "\n";
    return kExitExclusions;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// dl

int cmd_dl(const GlobalOpts& g, const DlExperimentConfig& config) {
  const DlResult result = run_dl_experiment(config);

  long included = 0, excluded = 0;
  for (const DlCell& cell : result.cells) {
    included += cell.draws;
    excluded += cell.exclusions;
  }
  const double rate =
      included + excluded > 0 ? double(excluded) / double(included + excluded) : 0.0;

  json strategies = json::array();
  for (const StrategySpec& spec : config.strategies) strategies.push_back(spec.label());
  json schemes = json::array();
  for (PrecodingScheme scheme : config.schemes) schemes.push_back(scheme_name(scheme));
  json resolved{{"M", config.antenna_count},
                {"f", config.reference},
                {"K", config.user_count},
                {"strategies", strategies},
                {"calibration_snr_db", config.calibration_snr_db},
                {"draws", config.draws},
                {"sigma_h_sq", config.sigma_h_sq},
                {"a", config.a},
                {"b", config.b},
                {"mode", mode_name(config.mode)},
                {"noise_var", config.noise_var},
                {"schemes", schemes},
                {"seed", config.base_seed},
                {"threads", config.threads},
                {"format", g.format},
                {"max_exclusion_rate", g.max_exclusion_rate}};
  json diagnostics{{"exclusion_rate", rate},
                   {"excluded_draws", excluded},
                   {"included_draws", included}};

  const std::string payload = g.format == "csv" ? dl_to_csv(result) : dl_to_json(result);
  emit(g, "dl", payload, resolved, diagnostics);
  if (rate > g.max_exclusion_rate) {
    std::cerr << "dl: excluded-draw rate " << rate << " exceeds "
              << g.max_exclusion_rate << "\n";
    return kExitExclusions;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// estimate

int cmd_estimate(const GlobalOpts& g, const std::string& input_path,
                 const std::string& mode_text, const std::string& strategy_text) {
  const MeasurementFile file = measurements_from_json(read_file(input_path));
  const MeasurementSet& meas = file.measurements;
  const InterconnectionStrategy& strategy = meas.strategy();

  if (!strategy_text.empty()) {
    const StrategySpec spec = parse_strategy_spec(strategy_text);
    const InterconnectionStrategy expected =
        realize(spec, strategy.antenna_count(), strategy.reference());
    if (!(expected == strategy))
      throw StructuralError("measurement file edges do not match strategy " +
                            spec.label());
  }

  const CalibrationMode mode = parse_mode(mode_text);
  const CalibrationPathTable paths = compute_paths(strategy);

  json resolved{{"input", input_path},
                {"mode", mode_text},
                {"strategy", strategy_text.empty() ? json() : json(strategy_text)},
                {"format", g.format}};

  std::string payload;
  json diagnostics;
  if (mode == CalibrationMode::Full) {
    const FullCalibrationEstimate est =
        estimate_full(meas, paths, file.alpha_f, file.beta_f, meas.channel().line_gain);
    diagnostics["residual"] = residual_full(est, meas, meas.channel().line_gain);
    if (g.format == "csv") {
      payload = "antenna,alpha_re,alpha_im,beta_re,beta_im\n";
      for (int m = 1; m <= est.antenna_count; ++m) {
        payload += std::to_string(m) + ',' + fmt_double(est.alpha_hat[m].real()) + ',' +
                   fmt_double(est.alpha_hat[m].imag()) + ',' +
                   fmt_double(est.beta_hat[m].real()) + ',' +
                   fmt_double(est.beta_hat[m].imag()) + '\n';
      }
    } else {
      payload = full_estimate_to_json(est);
    }
  } else {
    const RelativeCalibrationEstimate est =
        estimate_relative(meas, paths, file.beta_f / file.alpha_f);
    diagnostics["residual"] = residual_relative(est, meas);
    if (g.format == "csv") {
      payload = "antenna,c_re,c_im\n";
      for (int m = 1; m <= est.antenna_count; ++m) {
        payload += std::to_string(m) + ',' + fmt_double(est.c_hat[m].real()) + ',' +
                   fmt_double(est.c_hat[m].imag()) + '\n';
      }
    } else {
      payload = relative_estimate_to_json(est);
    }
  }
  emit(g, "estimate", payload, resolved, diagnostics);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transmission-line self-calibration toolkit for antenna arrays"};
  app.require_subcommand(1);

  // Shared option state; each subcommand gets its own copy of the globals.
  struct SweepFlags {
    GlobalOpts g;
    int M = 0, f = 1;
    double a = 1.0, b = 1.0, sigma_h = 0.0;
    long trials = 10000;
    std::string snr = "10:40:5", strategies = "star", mode = "full",
                persistence = "trial";
  };
  struct DlFlags {
    GlobalOpts g;
    int M = 32, f = 17, K = 6;
    double a = 1.0, b = 1.0, sigma_h = 0.0, noise_var = 1.0;
    long draws = 1000;
    std::string snr = "10:40:5", strategies = "star", mode = "full", schemes = "mf,zf";
  };
  struct CrlbFlags {
    GlobalOpts g;
    int M = 0, f = 1;
    double a = 1.0, b = 1.0, snr = 20.0;
    std::string strategy = "star";
  };
  struct OptFlags {
    GlobalOpts g;
    int M = 0, f = 1;
    double a = 1.0, b = 1.0, snr = 20.0;
  };
  struct EstimateFlags {
    GlobalOpts g;
    std::string input, mode = "full", strategy;
  };

  CrlbFlags crlb;
  OptFlags opt;
  SweepFlags sweep;
  DlFlags dl;
  EstimateFlags est;

  auto* crlb_cmd = app.add_subcommand("crlb", "Closed-form and numerical CRLB report");
  Binder crlb_bind(crlb_cmd);
  std::string crlb_config;
  crlb_cmd->add_option("--config", crlb_config, "JSON config supplying defaults");
  crlb_bind.bind("--M", crlb.M, "Antenna count");
  crlb_bind.bind("--f", crlb.f, "Reference antenna (1-based)");
  crlb_bind.bind("--a", crlb.a, "Common transmit gain amplitude");
  crlb_bind.bind("--b", crlb.b, "Common receive gain amplitude");
  crlb_bind.bind("--snr", crlb.snr, "Calibration SNR in dB");
  crlb_bind.bind("--strategy", crlb.strategy,
                 "star | daisy | combined:<z> | file:<path>");
  add_globals(crlb_bind, crlb.g);

  auto* opt_cmd = app.add_subcommand(
      "verify-optimality", "Exhaustively check the star minimizes the CRLB trace");
  Binder opt_bind(opt_cmd);
  std::string opt_config;
  opt_cmd->add_option("--config", opt_config, "JSON config supplying defaults");
  opt_bind.bind("--M", opt.M, "Antenna count (enumeration cap 8)");
  opt_bind.bind("--f", opt.f, "Reference antenna (1-based)");
  opt_bind.bind("--a", opt.a, "Common transmit gain amplitude");
  opt_bind.bind("--b", opt.b, "Common receive gain amplitude");
  opt_bind.bind("--snr", opt.snr, "Calibration SNR in dB");
  add_globals(opt_bind, opt.g);

  auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo MSE vs CRLB SNR sweep");
  Binder sweep_bind(sweep_cmd);
  std::string sweep_config;
  sweep_cmd->add_option("--config", sweep_config, "JSON config supplying defaults");
  sweep_bind.bind("--M", sweep.M, "Antenna count");
  sweep_bind.bind("--f", sweep.f, "Reference antenna (1-based)");
  sweep_bind.bind("--strategies", sweep.strategies,
                  "Comma list: star | daisy | combined:<z> | file:<path>");
  sweep_bind.bind("--snr", sweep.snr, "SNR grid lo:hi:step (dB), or comma list");
  sweep_bind.bind("--trials", sweep.trials, "Monte Carlo trials per grid point");
  sweep_bind.bind("--sigma-h", sweep.sigma_h, "Per-line distortion variance");
  sweep_bind.bind("--a", sweep.a, "Common transmit gain amplitude");
  sweep_bind.bind("--b", sweep.b, "Common receive gain amplitude");
  sweep_bind.bind("--mode", sweep.mode, "full | relative");
  sweep_bind.bind("--persistence", sweep.persistence,
                  "Distortion persistence: trial | deployment");
  add_globals(sweep_bind, sweep.g);

  auto* dl_cmd = app.add_subcommand("dl", "Downlink spectral-efficiency experiment");
  Binder dl_bind(dl_cmd);
  std::string dl_config;
  dl_cmd->add_option("--config", dl_config, "JSON config supplying defaults");
  dl_bind.bind("--M", dl.M, "BS antenna count");
  dl_bind.bind("--f", dl.f, "Reference antenna (1-based)");
  dl_bind.bind("--K", dl.K, "User count");
  dl_bind.bind("--strategies", dl.strategies,
               "Comma list: star | daisy | combined:<z> | file:<path>");
  dl_bind.bind("--snr", dl.snr, "Calibration SNR grid lo:hi:step (dB)");
  dl_bind.bind("--draws", dl.draws, "Channel draws per grid point");
  dl_bind.bind("--sigma-h", dl.sigma_h, "Per-line distortion variance");
  dl_bind.bind("--a", dl.a, "Common transmit gain amplitude");
  dl_bind.bind("--b", dl.b, "Common receive gain amplitude");
  dl_bind.bind("--mode", dl.mode, "Calibration mode used for compensation");
  dl_bind.bind("--schemes", dl.schemes, "Comma list of precoders: mf,zf");
  dl_bind.bind("--noise-var", dl.noise_var, "DL receiver noise variance");
  add_globals(dl_bind, dl.g);

  auto* est_cmd = app.add_subcommand("estimate", "Run a calibration estimator on a "
                                                 "measurement JSON file");
  Binder est_bind(est_cmd);
  std::string est_config;
  est_cmd->add_option("--config", est_config, "JSON config supplying defaults");
  est_bind.bind("--input,-i", est.input, "Measurement JSON file");
  est_bind.bind("--mode", est.mode, "full | relative");
  est_bind.bind("--strategy", est.strategy,
                "Optional cross-check against the file's edge set");
  add_globals(est_bind, est.g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*crlb_cmd) {
      if (!crlb_config.empty()) crlb_bind.apply_config(load_config(crlb_config));
      if (crlb.M < 2) throw StructuralError("crlb needs --M >= 2");
      return cmd_crlb(crlb.g, crlb.M, crlb.f, crlb.a, crlb.b, crlb.snr, crlb.strategy);
    }
    if (*opt_cmd) {
      if (!opt_config.empty()) opt_bind.apply_config(load_config(opt_config));
      if (opt.M < 2) throw StructuralError("verify-optimality needs --M >= 2");
      return cmd_verify_optimality(opt.g, opt.M, opt.f, opt.a, opt.b, opt.snr);
    }
    if (*sweep_cmd) {
      if (!sweep_config.empty()) sweep_bind.apply_config(load_config(sweep_config));
      if (sweep.M < 2) throw StructuralError("sweep needs --M >= 2");
      SweepConfig config;
      config.antenna_count = sweep.M;
      config.reference = sweep.f;
      config.strategies = parse_strategy_list(sweep.strategies);
      config.snr_grid_db = parse_snr_grid(sweep.snr);
      config.trials = sweep.trials;
      config.sigma_h_sq = sweep.sigma_h;
      config.a = sweep.a;
      config.b = sweep.b;
      config.mode = parse_mode(sweep.mode);
      if (sweep.persistence == "trial") {
        config.persistence = DistortionPersistence::PerTrial;
      } else if (sweep.persistence == "deployment") {
        config.persistence = DistortionPersistence::PerDeployment;
      } else {
        throw StructuralError("bad persistence \"" + sweep.persistence +
                              "\": expected trial | deployment");
      }
      config.base_seed = sweep.g.seed;
      config.threads = resolve_threads(sweep.g);
      return cmd_sweep(sweep.g, config);
    }
    if (*dl_cmd) {
      if (!dl_config.empty()) dl_bind.apply_config(load_config(dl_config));
      DlExperimentConfig config;
      config.antenna_count = dl.M;
      config.reference = dl.f;
      config.user_count = dl.K;
      config.strategies = parse_strategy_list(dl.strategies);
      config.calibration_snr_db = parse_snr_grid(dl.snr);
      config.draws = dl.draws;
      config.a = dl.a;
      config.b = dl.b;
      config.sigma_h_sq = dl.sigma_h;
      config.mode = parse_mode(dl.mode);
      config.noise_var = dl.noise_var;
      config.schemes.clear();
      std::size_t pos = 0;
      while (pos <= dl.schemes.size()) {
        const std::size_t comma = std::min(dl.schemes.find(',', pos), dl.schemes.size());
        config.schemes.push_back(parse_scheme(dl.schemes.substr(pos, comma - pos)));
        pos = comma + 1;
      }
      config.base_seed = dl.g.seed;
      config.threads = resolve_threads(dl.g);
      return cmd_dl(dl.g, config);
    }
    if (*est_cmd) {
      if (!est_config.empty()) est_bind.apply_config(load_config(est_config));
      if (est.input.empty()) throw StructuralError("estimate needs --input");
      return cmd_estimate(est.g, est.input, est.mode, est.strategy);
    }
  } catch (const std::exception& e) {
    std::cerr << "selfcal: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
