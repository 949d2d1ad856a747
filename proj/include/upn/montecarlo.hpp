#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "upn/market_model.hpp"

namespace upn {

/// Finite population meeting-process run. Each pair of users meets in a slot
/// with probability rho = lambda / n_agents.
struct SimConfig {
  int n_agents = 5000;
  double lambda = 5.0;
  long slots = 10000;
  std::uint64_t seed = 1;
  MembershipState state;

  double rho() const { return lambda / static_cast<double>(n_agents); }
  void validate() const;
};

/// A slot-batch estimate with its 95% normal-approximation half-width.
struct Estimate {
  double value = 0.0;
  double half_width = 0.0;
};

struct SimStats {
  Estimate p_h;        ///< fraction of clients meeting at least one host
  Estimate y_c;        ///< clients served per host per slot
  Estimate revenue;    ///< operator margin revenue per user per slot
  int n_clients = 0;
  int n_hosts = 0;
  long connections = 0;            ///< total client connections, counted client-side
  bool flow_conserved = true;      ///< host-side count matched client-side count every slot
  std::uint64_t seed = 0;
  int n_agents = 0;
  double lambda = 0.0;
  long slots = 0;
};

/// Runs the meeting process. Agents get stratified types from the type
/// distribution and memberships from the state's intervals. Per client and
/// slot the number of met hosts is Binomial(H, rho); a client meeting at least
/// one picks a host uniformly. A type-theta agent requests one data unit per
/// slot with probability theta; a client's request is served only when
/// connected.
///
/// Random streams: slot t uses std::mt19937_64 seeded with
/// splitmix64(seed ^ splitmix64(t + 1)); agent types use the stream of t = -1.
SimStats simulate(const SimConfig& config, const MarketParams& params,
                  const OperatorStrategy& strategy);

struct ComparisonRow {
  std::string quantity;
  double theory = 0.0;
  double estimate = 0.0;
  double half_width = 0.0;
  double bias_bound = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ComparisonRow> rows;
  std::uint64_t seed = 0;
  bool all_pass() const;
};

/// Checks |estimate - closed form| <= k_sigma * half_width + bias_bound for
/// P_H, Y_c and revenue. The bias bound is the largest gap between the exact
/// finite-population expectation and the large-N closed form over host and
/// client counts within the state's boundary rounding of its nominal counts.
ValidationReport compare_with_theory(const SimStats& stats, const MembershipState& state,
                                     const MarketParams& params, const OperatorStrategy& strategy,
                                     double k_sigma);

/// CSV columns: quantity,theory,estimate,half_width,bias_bound,pass
void write_report_csv(std::ostream& os, const ValidationReport& report);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace upn
