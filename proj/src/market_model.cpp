#include "upn/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace upn {

namespace {

// Below this rate the removable singularity of (1 - e^-x)/x is evaluated by series.
constexpr double kSeriesThreshold = 1e-6;

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
}

void push_nonempty(IntervalList& list, double lo, double hi) {
  if (hi > lo) list.push_back(Interval{lo, hi});
}

}  // namespace

void MarketParams::validate() const {
  const std::pair<const char*, double> money[] = {
      {"v_bar_h", v_bar_h}, {"v_bar_c", v_bar_c},   {"c_h", c_h},
      {"c_c", c_c},         {"gamma_h", gamma_h},   {"gamma_hc", gamma_hc},
      {"gamma_c", gamma_c}, {"omega", omega}};
  for (auto [name, value] : money) {
    require(std::isfinite(value) && value >= 0.0, name, "must be finite and >= 0");
  }
  require(std::isfinite(lambda) && lambda >= 0.0, "lambda", "must be finite and >= 0");
  require(std::isfinite(p_max) && p_max > 0.0, "p_max", "must be finite and > 0");
  require(c_h > c_c, "c_h", "must exceed c_c");
  if (!type_distribution.is_uniform()) {
    require(std::abs(type_distribution.total_mass() - 1.0) <= 1e-9, "type_distribution",
            "must integrate to 1 over [0,1]");
  }
}

MarketParams MarketParams::baseline() { return MarketParams{}; }

void OperatorStrategy::validate(const MarketParams& params) const {
  require(std::isfinite(p) && p >= 0.0 && p <= params.p_max, "p", "must lie in [0, p_max]");
  require(std::isfinite(delta) && delta >= 0.0 && delta <= 1.0, "delta", "must lie in [0, 1]");
}

std::string to_string(Membership m) {
  switch (m) {
    case Membership::alien: return "alien";
    case Membership::client: return "client";
    case Membership::host: return "host";
  }
  return "unknown";
}

MembershipState MembershipState::all_alien() { return MembershipState{}; }

MembershipState MembershipState::from_thresholds(double theta_a, double theta_h,
                                                 const TypeDistribution& dist) {
  theta_a = std::clamp(theta_a, 0.0, 1.0);
  theta_h = std::clamp(theta_h, theta_a, 1.0);
  MembershipState s;
  push_nonempty(s.client_intervals, theta_a, theta_h);
  push_nonempty(s.host_intervals, theta_h, 1.0);
  if (dist.is_uniform()) {
    s.mu_a = theta_a;
    s.mu_c = theta_h - theta_a;
    s.mu_h = 1.0 - theta_h;
  } else {
    s.mu_c = dist.mass(s.client_intervals);
    s.mu_h = dist.mass(s.host_intervals);
    s.mu_a = 1.0 - s.mu_c - s.mu_h;
  }
  return s;
}

MembershipState MembershipState::from_fractions(double mu_c, double mu_h,
                                                const TypeDistribution& dist) {
  mu_c = std::clamp(mu_c, 0.0, 1.0);
  mu_h = std::clamp(mu_h, 0.0, 1.0 - mu_c);
  MembershipState s;
  s.mu_c = mu_c;
  s.mu_h = mu_h;
  s.mu_a = 1.0 - mu_c - mu_h;
  double host_lo = dist.quantile(1.0 - mu_h);
  double client_lo = dist.quantile(1.0 - mu_h - mu_c);
  if (mu_c > 0.0) push_nonempty(s.client_intervals, client_lo, host_lo);
  if (mu_h > 0.0) push_nonempty(s.host_intervals, host_lo, 1.0);
  return s;
}

MembershipState MembershipState::from_intervals(IntervalList clients, IntervalList hosts,
                                                const TypeDistribution& dist) {
  MembershipState s;
  s.client_intervals = std::move(clients);
  s.host_intervals = std::move(hosts);
  s.mu_c = dist.mass(s.client_intervals);
  s.mu_h = dist.mass(s.host_intervals);
  s.mu_a = 1.0 - s.mu_c - s.mu_h;
  return s;
}

Membership MembershipState::membership_of(double theta) const {
  for (const auto& iv : host_intervals) {
    if (iv.contains(theta)) return Membership::host;
  }
  for (const auto& iv : client_intervals) {
    if (theta > iv.lo && theta <= iv.hi) return Membership::client;
  }
  return Membership::alien;
}

UnitBenefits unit_benefits(const MarketParams& params, const OperatorStrategy& strategy) {
  UnitBenefits b;
  b.pi_c = params.v_bar_c - params.gamma_c - strategy.p;
  b.pi_h = params.v_bar_h - params.gamma_h - strategy.p * (1.0 - strategy.delta);
  b.pi_h_tilde = strategy.delta * strategy.p - params.gamma_hc;
  return b;
}

double meeting_prob(double mu_h, double lambda) { return -std::expm1(-mu_h * lambda); }

double other_hosts_pmf(int k, double mu_h, double lambda) {
  if (k < 0) return 0.0;
  double rate = mu_h * lambda;
  if (rate == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(rate) - rate - std::lgamma(k + 1.0));
}

double connect_prob(double mu_h, double lambda) {
  double x = mu_h * lambda;
  if (x < kSeriesThreshold) return 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0;
  return -std::expm1(-x) / x;
}

double clients_per_host(double mu_c, double mu_h, double lambda) {
  return mu_c * lambda * connect_prob(mu_h, lambda);
}

ClassMeans class_means(const MembershipState& state, const TypeDistribution& dist) {
  auto mean = [&](const IntervalList& ivs) {
    double m = dist.mass(ivs);
    return m > 0.0 ? dist.first_moment(ivs) / m : 0.0;
  };
  return ClassMeans{mean(state.client_intervals), mean(state.host_intervals)};
}

MarketEnvironment environment(const MembershipState& state, const MarketParams& params,
                              const OperatorStrategy& strategy) {
  MarketEnvironment env;
  env.benefits = unit_benefits(params, strategy);
  env.meeting_prob = meeting_prob(state.mu_h, params.lambda);
  env.clients_per_host = clients_per_host(state.mu_c, state.mu_h, params.lambda);
  auto means = class_means(state, params.type_distribution);
  env.theta_bar_c = means.theta_bar_c;
  env.theta_bar_h = means.theta_bar_h;
  return env;
}

double payoff(double theta, Membership membership, const MarketEnvironment& env,
              const MarketParams& params) {
  const auto& b = env.benefits;
  switch (membership) {
    case Membership::alien:
      return 0.0;
    case Membership::client:
      return theta * env.meeting_prob * b.pi_c - params.c_c;
    case Membership::host:
      return theta * b.pi_h + env.theta_bar_c * env.clients_per_host * b.pi_h_tilde - params.c_h;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace upn
