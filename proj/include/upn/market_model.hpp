#pragma once

#include <stdexcept>
#include <string>

#include "upn/type_distribution.hpp"

namespace upn {

/// Economic constants of the user-provided network market. Money fields are per
/// byte unless noted; lambda is the mean number of users met per slot.
struct MarketParams {
  double v_bar_h = 15.0;   ///< average data value for a host
  double v_bar_c = 10.0;   ///< average data value for a client
  double c_h = 5.0;        ///< time-average cost of being a host (per slot)
  double c_c = 1.0;        ///< time-average cost of being a client (per slot)
  double gamma_h = 0.5;    ///< host transmission cost, own data
  double gamma_hc = 1.0;   ///< host transmission cost, forwarded client data
  double gamma_c = 0.1;    ///< client transmission cost
  double omega = 0.5;      ///< operator resource leasing cost
  double lambda = 5.0;
  double p_max = 15.0;
  TypeDistribution type_distribution;

  /// Throws std::invalid_argument naming the first violated field.
  void validate() const;

  /// Constants of the reference numerical study, with lambda = 5 and p_max = v_bar_h.
  static MarketParams baseline();
};

/// Stage-I operator decision: usage price and free-data quota ratio.
struct OperatorStrategy {
  double p = 0.0;
  double delta = 0.0;

  void validate(const MarketParams& params) const;
};

/// Per-byte benefits of consuming (client, host) and forwarding (host) data.
struct UnitBenefits {
  double pi_c = 0.0;
  double pi_h = 0.0;
  double pi_h_tilde = 0.0;

  // Modelling assumptions, recorded but never enforced.
  bool host_exceeds_client() const { return pi_h > pi_c; }
  bool forwarding_profitable() const { return pi_h_tilde > 0.0; }
  bool client_positive() const { return pi_c > 0.0; }
};

enum class Membership { alien, client, host };

std::string to_string(Membership m);

/// Population partition into aliens, clients and hosts. The fractions are the
/// f-measures of the interval lists; aliens hold the complement.
struct MembershipState {
  double mu_a = 1.0;
  double mu_c = 0.0;
  double mu_h = 0.0;
  IntervalList client_intervals;
  IntervalList host_intervals;

  static MembershipState all_alien();

  /// Threshold partition [0,theta_a] / [theta_a,theta_h] / [theta_h,1].
  static MembershipState from_thresholds(double theta_a, double theta_h,
                                         const TypeDistribution& dist);

  /// Sorted partition (aliens lowest, hosts highest) with the given fractions.
  static MembershipState from_fractions(double mu_c, double mu_h, const TypeDistribution& dist);

  /// Partition from explicit interval lists; fractions are their f-measures.
  static MembershipState from_intervals(IntervalList clients, IntervalList hosts,
                                        const TypeDistribution& dist);

  Membership membership_of(double theta) const;
};

/// Per-state quantities entering the payoffs.
struct MarketEnvironment {
  UnitBenefits benefits;
  double meeting_prob = 0.0;       ///< P_H
  double clients_per_host = 0.0;   ///< Y_c
  double theta_bar_c = 0.0;
  double theta_bar_h = 0.0;
};

UnitBenefits unit_benefits(const MarketParams& params, const OperatorStrategy& strategy);

/// Probability of meeting at least one host in a slot, 1 - exp(-mu_h * lambda).
double meeting_prob(double mu_h, double lambda);

/// Poisson probability that a client meets k hosts other than a given one.
double other_hosts_pmf(int k, double mu_h, double lambda);

/// Probability that a given met host is the one a client picks,
/// (1 - exp(-x)) / x with x = mu_h * lambda and value 1 at x = 0.
double connect_prob(double mu_h, double lambda);

/// Mean number of clients a host serves per slot; mu_c * lambda at mu_h = 0.
double clients_per_host(double mu_c, double mu_h, double lambda);

struct ClassMeans {
  double theta_bar_c = 0.0;
  double theta_bar_h = 0.0;
};

/// Conditional mean type of clients and hosts; an empty class has mean 0.
ClassMeans class_means(const MembershipState& state, const TypeDistribution& dist);

MarketEnvironment environment(const MembershipState& state, const MarketParams& params,
                              const OperatorStrategy& strategy);

/// Expected per-slot payoff of a type-theta user under the given membership.
double payoff(double theta, Membership membership, const MarketEnvironment& env,
              const MarketParams& params);

}  // namespace upn
