#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

#include "upn/equilibrium.hpp"
#include "upn/market_model.hpp"

namespace upn {

/// Per-user data demand served by the operator in a slot.
struct Demands {
  double x_h = 0.0;  ///< mu_h * theta_bar_h
  double x_c = 0.0;  ///< mu_c * theta_bar_c * P_H
};

struct ProfitPoint {
  OperatorStrategy strategy;
  double profit_per_user = 0.0;
  EquilibriumResult equilibrium;
  Demands demands;

  bool converged() const { return equilibrium.converged; }
};

/// Grid and inner-solver settings for the Stage-I search.
struct SearchSpec {
  int p_steps = 144;      ///< grid points over [0, p_max]
  int delta_steps = 101;  ///< grid points over [0, 1]
  double refine_tol = 1e-4;
  DynamicsOptions dynamics{.tol = 1e-9, .max_iter = 10000, .damping = 1.0,
                           .record_trajectory = false};
  /// Damping factors tried in order when the plain simultaneous update does
  /// not settle (e.g. a best-response cycle). Empty disables the fallback.
  std::vector<double> fallback_damping{0.5, 0.25, 0.1};

  void validate() const;
};

/// Equilibrium reached from the all-alien state: plain dynamics first, then
/// the damped fallbacks of `spec` in order.
EquilibriumResult stage_two_equilibrium(const MarketParams& params,
                                        const OperatorStrategy& strategy, const SearchSpec& spec);

/// Per-user operator profit (X_h + X_c) * (p (1 - delta) - omega) at the
/// Stage-II equilibrium. A non-converged equilibrium is flagged and the last
/// iterate is priced.
ProfitPoint profit_per_user(const OperatorStrategy& strategy, const MarketParams& params,
                            const SearchSpec& spec = {});

/// Optimum of one control with the other held fixed.
struct ConditionalOptimum {
  double fixed = 0.0;     ///< the held control (delta for p*(delta), p for delta*(p))
  double argmax = 0.0;    ///< the optimal free control
  double profit = 0.0;
  bool found = false;     ///< false when no evaluated point converged
};

ConditionalOptimum best_p_given_delta(double delta, const MarketParams& params,
                                      const SearchSpec& spec = {});
ConditionalOptimum best_delta_given_p(double p, const MarketParams& params,
                                      const SearchSpec& spec = {});

struct SurfaceEntry {
  double p = 0.0;
  double delta = 0.0;
  double profit = 0.0;
  double mu_a = 1.0;
  double mu_c = 0.0;
  double mu_h = 0.0;
  bool converged = false;
};

struct OptimizationResult {
  ProfitPoint best;
  ProfitPoint benchmark;  ///< pricing-only optimum (delta = 0)
  std::vector<ConditionalOptimum> p_star_curve;      ///< over the delta grid
  std::vector<ConditionalOptimum> delta_star_curve;  ///< over the p grid
  std::vector<SurfaceEntry> surface;                 ///< p-major, delta-minor
  int p_steps = 0;
  int delta_steps = 0;
};

struct OptimizeOptions {
  bool with_curves = true;
};

/// Global (p, delta) search: coarse grid argmax over converged points
/// (ties to the lexicographically smallest pair), coordinate-wise golden
/// section refinement, and both conditional-optimum curves.
OptimizationResult optimize(const MarketParams& params, const SearchSpec& spec = {},
                            const OptimizeOptions& options = {});

enum class SweepVariable { lambda, p, delta };

SweepVariable parse_sweep_variable(std::string_view name);

struct SweepRow {
  double lambda = 0.0;
  OperatorStrategy strategy;
  MembershipState state;
  Thresholds thresholds;
  double profit = 0.0;
  Demands demands;
  bool converged = false;
  int iterations = 0;
};

/// Equilibrium and profit at each value of one variable with the others fixed.
std::vector<SweepRow> sweep(const MarketParams& params, SweepVariable variable,
                            const std::vector<double>& values, const OperatorStrategy& fixed,
                            const SearchSpec& spec = {});

/// `steps` evenly spaced values from `from` to `to` inclusive.
std::vector<double> linspace(double from, double to, int steps);

void write_surface_csv(std::ostream& os, const OptimizationResult& result);
void write_p_star_csv(std::ostream& os, const OptimizationResult& result);
void write_delta_star_csv(std::ostream& os, const OptimizationResult& result);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace upn
