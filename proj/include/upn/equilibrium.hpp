#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "upn/market_model.hpp"

namespace upn {

/// Threshold types of the threshold-form best response: types at or below
/// theta_a stay aliens, types at or above theta_h become hosts.
struct Thresholds {
  double theta_a = 1.0;
  double theta_h = 1.0;
  /// False when the closed form does not describe the best response
  /// (host benefit not above the client's effective benefit, or not positive).
  bool closed_form_valid = true;
};

enum class ThresholdMode { normal, diagnostic };

/// Raised in diagnostic mode when the clamped thresholds come out of order.
class DegenerateOrdering : public std::runtime_error {
 public:
  DegenerateOrdering(double theta_a, double theta_h);
  double theta_a;
  double theta_h;
};

Thresholds thresholds(const MarketEnvironment& env, const MarketParams& params,
                      ThresholdMode mode = ThresholdMode::normal);
Thresholds thresholds(const MembershipState& state, const MarketParams& params,
                      const OperatorStrategy& strategy, ThresholdMode mode = ThresholdMode::normal);

/// Exact argmax partition of [0,1] for the three affine payoff lines. Valid for
/// any sign pattern of the unit benefits; the sets need not be contiguous.
MembershipState general_partition(const MarketParams& params, const OperatorStrategy& strategy,
                                  const MarketEnvironment& env);

/// One round of simultaneous best response.
MembershipState best_response(const MembershipState& state, const MarketParams& params,
                              const OperatorStrategy& strategy);

/// Sup-norm of the best-response displacement in (mu_c, mu_h).
double displacement(const MembershipState& state, const MarketParams& params,
                    const OperatorStrategy& strategy);

struct DynamicsOptions {
  double tol = 1e-9;
  int max_iter = 10000;
  /// Partial adjustment toward the best response; 1 is the plain simultaneous update.
  double damping = 1.0;
  bool record_trajectory = true;
};

struct EquilibriumResult {
  MembershipState state;
  MarketEnvironment env;
  /// Visited states, starting with the initial one. Without trajectory
  /// recording this holds only the initial and final states.
  std::vector<MembershipState> trajectory;
  /// Thresholds evaluated at each trajectory state.
  std::vector<Thresholds> trajectory_thresholds;
  /// Displacement measured at each trajectory state (NaN where not evaluated).
  std::vector<double> trajectory_residuals;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  double damping = 1.0;
};

/// Best-response dynamics. Each iteration evaluates the best response at the
/// current state; the run stops as soon as the displacement is within tol, so
/// a converged state always satisfies verify_equilibrium at the same tol.
/// Failing to converge is reported through `converged`, never thrown.
EquilibriumResult iterate_dynamics(const MembershipState& initial, const MarketParams& params,
                                   const OperatorStrategy& strategy,
                                   const DynamicsOptions& options = {});

bool verify_equilibrium(const MembershipState& state, const MarketParams& params,
                        const OperatorStrategy& strategy, double tol);

/// Independent fixed-point search: scans the (mu_c, mu_h) simplex on a
/// resolution x resolution grid, keeps local minima of the displacement map
/// below 2/resolution, and polishes each with a safeguarded Newton iteration.
/// Roots are deduplicated and sorted by (mu_h, mu_c).
std::vector<MembershipState> grid_oracle(const MarketParams& params,
                                         const OperatorStrategy& strategy, int resolution);

/// CSV columns: iter,mu_a,mu_c,mu_h,theta_a,theta_h,residual
void write_trajectory_csv(std::ostream& os, const EquilibriumResult& result);

}  // namespace upn
