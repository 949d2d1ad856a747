#include "upn/operator_optimizer.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "upn/csv.hpp"

namespace upn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Probe {
  double x = 0.0;
  double value = kNegInf;
};

// Keeps the larger value; on ties the smaller abscissa wins.
void keep_better(Probe& best, const Probe& candidate) {
  if (candidate.value > best.value || (candidate.value == best.value && candidate.x < best.x)) {
    best = candidate;
  }
}

// Golden-section search for a maximum on [lo, hi]. Returns the best point
// actually evaluated, which matters when the objective has kinks or gaps.
template <typename F>
Probe golden_section_max(F&& f, double lo, double hi, double tol) {
  static const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  Probe best;
  if (!(hi > lo)) {
    best = {lo, f(lo)};
    return best;
  }
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c), fd = f(d);
  keep_better(best, {c, fc});
  keep_better(best, {d, fd});
  while (hi - lo > tol) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
      keep_better(best, {c, fc});
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
      keep_better(best, {d, fd});
    }
  }
  return best;
}

double grid_value(double lo, double hi, int steps, int i) {
  if (i == steps - 1) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

Demands demands_at(const EquilibriumResult& eq) {
  const auto& s = eq.state;
  return Demands{s.mu_h * eq.env.theta_bar_h, s.mu_c * eq.env.theta_bar_c * eq.env.meeting_prob};
}

// Profit restricted to converged equilibria; others are not candidates.
double candidate_profit(const OperatorStrategy& strategy, const MarketParams& params,
                        const SearchSpec& spec) {
  auto pp = profit_per_user(strategy, params, spec);
  return pp.converged() ? pp.profit_per_user : kNegInf;
}

// Coarse best over precomputed grid values plus golden refinement on the
// neighbouring bracket.
template <typename F>
ConditionalOptimum refine_conditional(double fixed, const std::vector<double>& values,
                                      double lo, double hi, const SearchSpec& spec, F&& objective) {
  const int steps = static_cast<int>(values.size());
  ConditionalOptimum out;
  out.fixed = fixed;
  Probe best;
  int best_i = -1;
  for (int i = 0; i < steps; ++i) {
    if (values[i] > best.value) {
      best = {grid_value(lo, hi, steps, i), values[i]};
      best_i = i;
    }
  }
  if (best_i < 0) return out;
  double a = grid_value(lo, hi, steps, std::max(best_i - 1, 0));
  double b = grid_value(lo, hi, steps, std::min(best_i + 1, steps - 1));
  auto refined = golden_section_max(objective, a, b, spec.refine_tol);
  keep_better(best, refined);
  out.argmax = best.x;
  out.profit = best.value;
  out.found = true;
  return out;
}

}  // namespace

void SearchSpec::validate() const {
  if (p_steps < 2 || delta_steps < 2) throw std::invalid_argument("grid needs at least 2 steps");
  if (!(refine_tol > 0.0) || refine_tol > 1e-3) {
    throw std::invalid_argument("refine_tol must lie in (0, 1e-3]");
  }
  for (double a : fallback_damping) {
    if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("damping must lie in (0, 1]");
  }
}

EquilibriumResult stage_two_equilibrium(const MarketParams& params,
                                        const OperatorStrategy& strategy, const SearchSpec& spec) {
  auto result = iterate_dynamics(MembershipState::all_alien(), params, strategy, spec.dynamics);
  if (result.converged) return result;
  for (double damping : spec.fallback_damping) {
    auto options = spec.dynamics;
    options.damping = damping;
    auto damped = iterate_dynamics(MembershipState::all_alien(), params, strategy, options);
    if (damped.converged) return damped;
  }
  return result;
}

ProfitPoint profit_per_user(const OperatorStrategy& strategy, const MarketParams& params,
                            const SearchSpec& spec) {
  ProfitPoint pt;
  pt.strategy = strategy;
  pt.equilibrium = stage_two_equilibrium(params, strategy, spec);
  pt.demands = demands_at(pt.equilibrium);
  double margin = strategy.p * (1.0 - strategy.delta) - params.omega;
  pt.profit_per_user = (pt.demands.x_h + pt.demands.x_c) * margin;
  return pt;
}

ConditionalOptimum best_p_given_delta(double delta, const MarketParams& params,
                                      const SearchSpec& spec) {
  spec.validate();
  std::vector<double> values(spec.p_steps);
  for (int i = 0; i < spec.p_steps; ++i) {
    values[i] = candidate_profit({grid_value(0.0, params.p_max, spec.p_steps, i), delta}, params,
                                 spec);
  }
  return refine_conditional(delta, values, 0.0, params.p_max, spec, [&](double p) {
    return candidate_profit({p, delta}, params, spec);
  });
}

ConditionalOptimum best_delta_given_p(double p, const MarketParams& params,
                                      const SearchSpec& spec) {
  spec.validate();
  std::vector<double> values(spec.delta_steps);
  for (int j = 0; j < spec.delta_steps; ++j) {
    values[j] = candidate_profit({p, grid_value(0.0, 1.0, spec.delta_steps, j)}, params, spec);
  }
  return refine_conditional(p, values, 0.0, 1.0, spec, [&](double delta) {
    return candidate_profit({p, delta}, params, spec);
  });
}

OptimizationResult optimize(const MarketParams& params, const SearchSpec& spec,
                            const OptimizeOptions& options) {
  spec.validate();
  if (spec.p_steps < 50 || spec.delta_steps < 50) {
    throw std::invalid_argument("optimize needs at least 50 grid steps per dimension");
  }
  const int np = spec.p_steps, nd = spec.delta_steps;
  auto p_at = [&](int i) { return grid_value(0.0, params.p_max, np, i); };
  auto delta_at = [&](int j) { return grid_value(0.0, 1.0, nd, j); };

  OptimizationResult out;
  out.p_steps = np;
  out.delta_steps = nd;
  out.surface.reserve(static_cast<std::size_t>(np) * nd);
  std::vector<double> value(static_cast<std::size_t>(np) * nd, kNegInf);

  int best_i = -1, best_j = -1;
  double best_value = kNegInf;
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < nd; ++j) {
      OperatorStrategy s{p_at(i), delta_at(j)};
      auto pp = profit_per_user(s, params, spec);
      const auto& st = pp.equilibrium.state;
      out.surface.push_back(
          {s.p, s.delta, pp.profit_per_user, st.mu_a, st.mu_c, st.mu_h, pp.converged()});
      if (!pp.converged()) continue;
      value[static_cast<std::size_t>(i) * nd + j] = pp.profit_per_user;
      if (pp.profit_per_user > best_value) {
        best_value = pp.profit_per_user;
        best_i = i;
        best_j = j;
      }
    }
  }

  auto objective = [&](double p, double delta) {
    return candidate_profit({p, delta}, params, spec);
  };

  // Candidates for the global optimum, compared by profit then (p, delta).
  OperatorStrategy best_strategy{0.0, 0.0};
  auto consider = [&](double p, double delta, double v) {
    if (v > best_value ||
        (v == best_value && (p < best_strategy.p ||
                             (p == best_strategy.p && delta < best_strategy.delta)))) {
      best_value = v;
      best_strategy = {p, delta};
    }
  };

  if (best_i >= 0) {
    best_strategy = {p_at(best_i), delta_at(best_j)};
    double p = best_strategy.p, delta = best_strategy.delta;
    const double dp = params.p_max / (np - 1), dd = 1.0 / (nd - 1);
    for (int round = 0; round < 50; ++round) {
      auto rp = golden_section_max([&](double x) { return objective(x, delta); },
                                   std::max(0.0, p - dp), std::min(params.p_max, p + dp),
                                   spec.refine_tol);
      double moved = 0.0;
      if (rp.value > best_value) {
        moved = std::max(moved, std::abs(rp.x - p));
        p = rp.x;
        consider(p, delta, rp.value);
      }
      auto rd = golden_section_max([&](double x) { return objective(p, x); },
                                   std::max(0.0, delta - dd), std::min(1.0, delta + dd),
                                   spec.refine_tol);
      if (rd.value > best_value) {
        moved = std::max(moved, std::abs(rd.x - delta));
        delta = rd.x;
        consider(p, delta, rd.value);
      }
      if (moved < spec.refine_tol) break;
    }
  }

  // Conditional-optimum curves reuse the surface as their coarse stage.
  std::vector<double> column(np);
  for (int i = 0; i < np; ++i) column[i] = value[static_cast<std::size_t>(i) * nd];
  ConditionalOptimum pricing_only =
      refine_conditional(0.0, column, 0.0, params.p_max, spec,
                         [&](double p) { return objective(p, 0.0); });

  if (options.with_curves) {
    out.p_star_curve.reserve(nd);
    for (int j = 0; j < nd; ++j) {
      if (j == 0) {
        out.p_star_curve.push_back(pricing_only);
        continue;
      }
      for (int i = 0; i < np; ++i) column[i] = value[static_cast<std::size_t>(i) * nd + j];
      double delta = delta_at(j);
      out.p_star_curve.push_back(refine_conditional(
          delta, column, 0.0, params.p_max, spec,
          [&](double p) { return objective(p, delta); }));
    }
    out.delta_star_curve.reserve(np);
    std::vector<double> row(nd);
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < nd; ++j) row[j] = value[static_cast<std::size_t>(i) * nd + j];
      double p = p_at(i);
      out.delta_star_curve.push_back(refine_conditional(
          p, row, 0.0, 1.0, spec, [&](double d) { return objective(p, d); }));
    }
    for (const auto& c : out.p_star_curve) {
      if (c.found) consider(c.argmax, c.fixed, c.profit);
    }
    for (const auto& c : out.delta_star_curve) {
      if (c.found) consider(c.fixed, c.argmax, c.profit);
    }
  }
  if (pricing_only.found) consider(pricing_only.argmax, 0.0, pricing_only.profit);

  out.best = profit_per_user(best_strategy, params, spec);
  out.benchmark = profit_per_user({pricing_only.found ? pricing_only.argmax : 0.0, 0.0}, params,
                                  spec);
  return out;
}

SweepVariable parse_sweep_variable(std::string_view name) {
  if (name == "lambda") return SweepVariable::lambda;
  if (name == "p") return SweepVariable::p;
  if (name == "delta") return SweepVariable::delta;
  throw std::invalid_argument("unknown sweep variable '" + std::string(name) + "'");
}

std::vector<SweepRow> sweep(const MarketParams& params, SweepVariable variable,
                            const std::vector<double>& values, const OperatorStrategy& fixed,
                            const SearchSpec& spec) {
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (!(values[k] > values[k - 1])) throw std::invalid_argument("sweep range must increase");
  }
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (double v : values) {
    MarketParams local = params;
    OperatorStrategy strategy = fixed;
    switch (variable) {
      case SweepVariable::lambda: local.lambda = v; break;
      case SweepVariable::p: strategy.p = v; break;
      case SweepVariable::delta: strategy.delta = v; break;
    }
    local.validate();
    strategy.validate(local);
    auto pp = profit_per_user(strategy, local, spec);
    SweepRow row;
    row.lambda = local.lambda;
    row.strategy = strategy;
    row.state = pp.equilibrium.state;
    row.thresholds = thresholds(pp.equilibrium.env, local);
    row.profit = pp.profit_per_user;
    row.demands = pp.demands;
    row.converged = pp.converged();
    row.iterations = pp.equilibrium.iterations;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> linspace(double from, double to, int steps) {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (steps == 1) return {from};
  std::vector<double> out(steps);
  for (int i = 0; i < steps; ++i) out[i] = grid_value(from, to, steps, i);
  return out;
}

void write_surface_csv(std::ostream& os, const OptimizationResult& result) {
  csv::write_row(os, {"p", "delta", "profit", "mu_a", "mu_c", "mu_h", "converged"});
  for (const auto& e : result.surface) {
    csv::write_row(os, {csv::format(e.p), csv::format(e.delta), csv::format(e.profit),
                        csv::format(e.mu_a), csv::format(e.mu_c), csv::format(e.mu_h),
                        csv::format(e.converged)});
  }
}

namespace {

void write_curve(std::ostream& os, const std::vector<ConditionalOptimum>& curve,
                 std::string_view fixed_name, std::string_view argmax_name) {
  csv::write_row(os, {fixed_name, argmax_name, "profit"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& c : curve) {
    csv::write_row(os, {csv::format(c.fixed), csv::format(c.found ? c.argmax : nan),
                        csv::format(c.found ? c.profit : nan)});
  }
}

}  // namespace

void write_p_star_csv(std::ostream& os, const OptimizationResult& result) {
  write_curve(os, result.p_star_curve, "delta", "p_star");
}

void write_delta_star_csv(std::ostream& os, const OptimizationResult& result) {
  write_curve(os, result.delta_star_curve, "p", "delta_star");
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  csv::write_row(os, {"lambda", "p", "delta", "mu_a", "mu_c", "mu_h", "theta_a", "theta_h",
                      "profit", "x_h", "x_c", "converged", "iterations"});
  for (const auto& r : rows) {
    csv::write_row(os, {csv::format(r.lambda), csv::format(r.strategy.p),
                        csv::format(r.strategy.delta), csv::format(r.state.mu_a),
                        csv::format(r.state.mu_c), csv::format(r.state.mu_h),
                        csv::format(r.thresholds.theta_a), csv::format(r.thresholds.theta_h),
                        csv::format(r.profit), csv::format(r.demands.x_h),
                        csv::format(r.demands.x_c), csv::format(r.converged),
                        std::to_string(r.iterations)});
  }
}

}  // namespace upn
