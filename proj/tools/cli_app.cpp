#include "cli_app.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>

#include "upn/config.hpp"
#include "upn/csv.hpp"
#include "upn/equilibrium.hpp"
#include "upn/montecarlo.hpp"
#include "upn/operator_optimizer.hpp"

namespace upn::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  // Command-line overrides, folded into the config as run.* / params.* keys.
  std::map<std::string, std::string> overrides;
  bool negative_control = false;
};

void add_override(CLI::App* app, Options& opts, const std::string& flag, const std::string& key,
                  const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&opts, key](const std::string& v) { opts.overrides[key] = v; }, help);
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("--out", "cannot write '" + (dir / name).string() + "'");
  return os;
}

OperatorStrategy require_strategy(const RunConfig& rc, bool need_p, bool need_delta) {
  if (need_p && !rc.p) throw ConfigError("run.p", "missing required key 'run.p'");
  if (need_delta && !rc.delta) throw ConfigError("run.delta", "missing required key 'run.delta'");
  OperatorStrategy s{rc.p.value_or(0.0), rc.delta.value_or(0.0)};
  // Swept coordinates are validated per sample.
  MarketParams box = rc.params;
  OperatorStrategy probe{need_p ? s.p : 0.0, need_delta ? s.delta : 0.0};
  try {
    probe.validate(box);
  } catch (const std::invalid_argument& e) {
    std::string what = e.what();
    throw ConfigError("run." + what.substr(0, what.find(':')), what);
  }
  return s;
}

SearchSpec search_spec(const RunConfig& rc) {
  SearchSpec spec;
  spec.p_steps = rc.p_steps;
  spec.delta_steps = rc.delta_steps;
  spec.dynamics.tol = rc.tol;
  spec.dynamics.max_iter = rc.max_iter;
  spec.dynamics.damping = rc.damping;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("run.p_steps", e.what());
  }
  return spec;
}

DynamicsOptions dynamics_options(const RunConfig& rc) {
  if (!(rc.tol > 0.0)) throw ConfigError("run.tol", "run.tol must be > 0");
  if (rc.max_iter < 1) throw ConfigError("run.max_iter", "run.max_iter must be >= 1");
  if (!(rc.damping > 0.0 && rc.damping <= 1.0)) {
    throw ConfigError("run.damping", "run.damping must lie in (0, 1]");
  }
  return DynamicsOptions{rc.tol, rc.max_iter, rc.damping, true};
}

int cmd_equilibrium(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
  auto strategy = require_strategy(rc, true, true);
  auto options = dynamics_options(rc);
  auto result = iterate_dynamics(MembershipState::all_alien(), rc.params, strategy, options);

  auto traj = open_output(out_dir, "trajectory.csv");
  write_trajectory_csv(traj, result);

  auto summary = open_output(out_dir, "equilibrium_summary.csv");
  auto th = thresholds(result.env, rc.params);
  csv::write_row(summary, {"p", "delta", "lambda", "mu_a", "mu_c", "mu_h", "theta_a", "theta_h",
                           "P_H", "Y_c", "theta_bar_c", "theta_bar_h", "converged", "iterations",
                           "residual"});
  const auto& s = result.state;
  csv::write_row(summary,
                 {csv::format(strategy.p), csv::format(strategy.delta),
                  csv::format(rc.params.lambda), csv::format(s.mu_a), csv::format(s.mu_c),
                  csv::format(s.mu_h), csv::format(th.theta_a), csv::format(th.theta_h),
                  csv::format(result.env.meeting_prob), csv::format(result.env.clients_per_host),
                  csv::format(result.env.theta_bar_c), csv::format(result.env.theta_bar_h),
                  csv::format(result.converged), std::to_string(result.iterations),
                  csv::format(result.residual)});

  out << "equilibrium " << (result.converged ? "converged" : "NOT converged") << " after "
      << result.iterations << " iterations: mu_a=" << csv::format(s.mu_a)
      << " mu_c=" << csv::format(s.mu_c) << " mu_h=" << csv::format(s.mu_h) << '\n';
  return result.converged ? kSuccess : kNotConverged;
}

int cmd_sweep(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
  if (!rc.var) throw ConfigError("run.var", "missing required key 'run.var'");
  SweepVariable var;
  try {
    var = parse_sweep_variable(*rc.var);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("run.var", e.what());
  }
  if (!rc.from) throw ConfigError("run.from", "missing required key 'run.from'");
  if (!rc.to) throw ConfigError("run.to", "missing required key 'run.to'");
  if (!rc.steps) throw ConfigError("run.steps", "missing required key 'run.steps'");
  if (*rc.steps < 1) throw ConfigError("run.steps", "sweep range is empty (run.steps < 1)");
  if (*rc.from > *rc.to || (*rc.steps > 1 && !(*rc.from < *rc.to))) {
    throw ConfigError("run.from", "sweep range is empty (run.from must be below run.to)");
  }
  auto strategy = require_strategy(rc, var != SweepVariable::p, var != SweepVariable::delta);
  auto spec = search_spec(rc);

  auto values = linspace(*rc.from, *rc.to, *rc.steps);
  std::vector<SweepRow> rows;
  try {
    rows = sweep(rc.params, var, values, strategy, spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("run.to", std::string("sweep value out of range: ") + e.what());
  }
  auto os = open_output(out_dir, "sweep_" + *rc.var + ".csv");
  write_sweep_csv(os, rows);
  out << "sweep over " << *rc.var << ": " << rows.size() << " rows\n";
  return kSuccess;
}

int cmd_optimize(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
  auto spec = search_spec(rc);
  if (spec.p_steps < 50 || spec.delta_steps < 50) {
    throw ConfigError(spec.p_steps < 50 ? "run.p_steps" : "run.delta_steps",
                      "optimize needs at least 50 grid steps per dimension");
  }
  auto result = optimize(rc.params, spec);
  {
    auto os = open_output(out_dir, "surface.csv");
    write_surface_csv(os, result);
  }
  {
    auto os = open_output(out_dir, "p_star.csv");
    write_p_star_csv(os, result);
  }
  {
    auto os = open_output(out_dir, "delta_star.csv");
    write_delta_star_csv(os, result);
  }
  {
    auto os = open_output(out_dir, "best.csv");
    csv::write_row(os, {"p", "delta", "profit", "mu_a", "mu_c", "mu_h", "benchmark_p",
                        "benchmark_profit"});
    const auto& s = result.best.equilibrium.state;
    csv::write_row(os, {csv::format(result.best.strategy.p),
                        csv::format(result.best.strategy.delta),
                        csv::format(result.best.profit_per_user), csv::format(s.mu_a),
                        csv::format(s.mu_c), csv::format(s.mu_h),
                        csv::format(result.benchmark.strategy.p),
                        csv::format(result.benchmark.profit_per_user)});
  }
  out << "best (p, delta) = (" << csv::format(result.best.strategy.p) << ", "
      << csv::format(result.best.strategy.delta)
      << ") profit=" << csv::format(result.best.profit_per_user)
      << "; pricing-only p=" << csv::format(result.benchmark.strategy.p)
      << " profit=" << csv::format(result.benchmark.profit_per_user) << '\n';

  if (rc.lambda_from || rc.lambda_to || rc.lambda_steps) {
    if (!rc.lambda_from || !rc.lambda_to || !rc.lambda_steps) {
      throw ConfigError(!rc.lambda_from ? "run.lambda_from"
                        : !rc.lambda_to ? "run.lambda_to"
                                        : "run.lambda_steps",
                        "lambda sweep needs run.lambda_from, run.lambda_to and run.lambda_steps");
    }
    if (*rc.lambda_steps < 1 || *rc.lambda_from > *rc.lambda_to || *rc.lambda_from < 0.0) {
      throw ConfigError("run.lambda_from", "invalid lambda sweep range");
    }
    auto os = open_output(out_dir, "profit_vs_lambda.csv");
    csv::write_row(os, {"lambda", "hybrid_p", "hybrid_delta", "hybrid_profit", "benchmark_p",
                        "benchmark_profit", "gain"});
    for (double lambda : linspace(*rc.lambda_from, *rc.lambda_to, *rc.lambda_steps)) {
      MarketParams params = rc.params;
      params.lambda = lambda;
      auto r = optimize(params, spec, OptimizeOptions{.with_curves = false});
      double gain = r.benchmark.profit_per_user > 0.0
                        ? r.best.profit_per_user / r.benchmark.profit_per_user - 1.0
                        : std::numeric_limits<double>::quiet_NaN();
      csv::write_row(os, {csv::format(lambda), csv::format(r.best.strategy.p),
                          csv::format(r.best.strategy.delta),
                          csv::format(r.best.profit_per_user),
                          csv::format(r.benchmark.strategy.p),
                          csv::format(r.benchmark.profit_per_user), csv::format(gain)});
    }
  }
  return kSuccess;
}

int cmd_validate(const RunConfig& rc, const fs::path& out_dir, bool negative_control,
                 std::ostream& out) {
  MembershipState state;
  OperatorStrategy strategy{rc.p.value_or(0.0), rc.delta.value_or(0.0)};
  if (rc.mu_c || rc.mu_h) {
    double mc = rc.mu_c.value_or(0.0), mh = rc.mu_h.value_or(0.0);
    if (mc < 0.0 || mh < 0.0 || mc + mh > 1.0) {
      throw ConfigError("run.mu_c", "run.mu_c and run.mu_h must be fractions summing to <= 1");
    }
    state = MembershipState::from_fractions(mc, mh, rc.params.type_distribution);
    if (rc.p || rc.delta) strategy = require_strategy(rc, true, true);
  } else {
    strategy = require_strategy(rc, true, true);
    auto eq = stage_two_equilibrium(rc.params, strategy, search_spec(rc));
    state = eq.state;
  }

  SimConfig sim{rc.agents, rc.params.lambda, rc.slots, rc.seed, state};
  try {
    sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("run.agents", e.what());
  }
  if (!(rc.k_sigma > 0.0)) throw ConfigError("run.k_sigma", "run.k_sigma must be > 0");
  auto stats = simulate(sim, rc.params, strategy);

  MembershipState theory_state = state;
  if (negative_control) {
    // Theory evaluated at a deliberately wrong host share.
    double shift = state.mu_h + state.mu_c <= 0.9 ? 0.1 : -0.1;
    double mh = std::clamp(state.mu_h + shift, 0.0, 1.0 - state.mu_c);
    theory_state = MembershipState::from_fractions(state.mu_c, mh, rc.params.type_distribution);
  }
  auto report = compare_with_theory(stats, theory_state, rc.params, strategy, rc.k_sigma);
  auto os = open_output(out_dir, "validation.csv");
  write_report_csv(os, report);

  out << "seed=" << stats.seed << " agents=" << rc.agents << " slots=" << rc.slots
      << " clients=" << stats.n_clients << " hosts=" << stats.n_hosts
      << " flow_conserved=" << (stats.flow_conserved ? "yes" : "no") << '\n';
  for (const auto& r : report.rows) {
    out << "  " << r.quantity << ": theory=" << csv::format(r.theory)
        << " estimate=" << csv::format(r.estimate) << " half_width=" << csv::format(r.half_width)
        << " bias_bound=" << csv::format(r.bias_bound) << (r.pass ? " PASS" : " FAIL") << '\n';
  }
  return report.all_pass() && stats.flow_conserved ? kSuccess : kValidationFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Membership equilibrium, pricing optimisation and meeting-process validation "
               "for operator-assisted mobile user-provided networks"};
  app.require_subcommand(1);
  Options opts;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "key = value parameter file");
    sub->add_option("--out", opts.out_dir, "output directory for CSV files");
    add_override(sub, opts, "--p", "run.p", "price per byte");
    add_override(sub, opts, "--delta", "run.delta", "free data quota ratio");
    add_override(sub, opts, "--lambda", "params.lambda", "mean users met per slot");
  };

  auto* eq = app.add_subcommand("equilibrium", "best-response dynamics from the all-alien state");
  common(eq);
  add_override(eq, opts, "--tol", "run.tol", "convergence tolerance");
  add_override(eq, opts, "--max-iter", "run.max_iter", "iteration cap");
  add_override(eq, opts, "--damping", "run.damping", "partial adjustment factor in (0,1]");

  auto* sw = app.add_subcommand("sweep", "equilibrium and profit along one variable");
  common(sw);
  add_override(sw, opts, "--var", "run.var", "lambda, p or delta");
  add_override(sw, opts, "--from", "run.from", "first value");
  add_override(sw, opts, "--to", "run.to", "last value");
  add_override(sw, opts, "--steps", "run.steps", "number of values");

  auto* op = app.add_subcommand("optimize", "operator price and quota ratio search");
  common(op);
  add_override(op, opts, "--p-steps", "run.p_steps", "price grid points");
  add_override(op, opts, "--delta-steps", "run.delta_steps", "quota grid points");
  add_override(op, opts, "--lambda-from", "run.lambda_from", "lambda sweep start");
  add_override(op, opts, "--lambda-to", "run.lambda_to", "lambda sweep end");
  add_override(op, opts, "--lambda-steps", "run.lambda_steps", "lambda sweep points");

  auto* va = app.add_subcommand("validate", "Monte-Carlo check of the large-network formulas");
  common(va);
  add_override(va, opts, "--agents", "run.agents", "population size");
  add_override(va, opts, "--slots", "run.slots", "number of slots");
  add_override(va, opts, "--seed", "run.seed", "64-bit seed");
  add_override(va, opts, "--mu-c", "run.mu_c", "client share (skips the equilibrium solve)");
  add_override(va, opts, "--mu-h", "run.mu_h", "host share (skips the equilibrium solve)");
  va->add_flag("--negative-control", opts.negative_control,
               "compare against a deliberately wrong state");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kSuccess;
    }
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    KeyValueConfig config;
    if (!opts.config_path.empty()) config = KeyValueConfig::load(opts.config_path);
    for (const auto& [key, value] : opts.overrides) config.set(key, value);
    RunConfig rc = run_config_from(config);

    fs::path out_dir(opts.out_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
      throw ConfigError("--out", "cannot create output directory '" + out_dir.string() + "'");
    }

    if (eq->parsed()) return cmd_equilibrium(rc, out_dir, out);
    if (sw->parsed()) return cmd_sweep(rc, out_dir, out);
    if (op->parsed()) return cmd_optimize(rc, out_dir, out);
    return cmd_validate(rc, out_dir, opts.negative_control, out);
  } catch (const ConfigError& e) {
    err << "config error [" << e.key() << "]: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace upn::cli
