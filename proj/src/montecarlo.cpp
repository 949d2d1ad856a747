#include "upn/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "upn/csv.hpp"

namespace upn {

namespace {

constexpr double kZ95 = 1.959963984540054;

// Welford accumulator over per-slot batch values.
class SlotMoments {
 public:
  void add(double x) {
    ++n_;
    double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  Estimate estimate() const {
    Estimate e;
    e.value = mean_;
    if (n_ >= 2) {
      double var = m2_ / static_cast<double>(n_ - 1);
      e.half_width = kZ95 * std::sqrt(var / static_cast<double>(n_));
    }
    return e;
  }

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

// P(meet >= 1 of `hosts` hosts) in a population with pair probability rho.
double finite_meeting_prob(long hosts, double rho) {
  if (hosts <= 0) return 0.0;
  return -std::expm1(static_cast<double>(hosts) * std::log1p(-rho));
}

// Candidate head counts for a class of nominal size mu * n. Each interior
// interval endpoint can move one boundary agent in or out.
std::vector<long> count_range(double mu, int n, int slack) {
  if (mu <= 0.0) return {0};
  double nominal = mu * n;
  long lo = std::max(0L, static_cast<long>(std::floor(nominal)) - slack);
  long hi = std::min(static_cast<long>(n), static_cast<long>(std::ceil(nominal)) + slack);
  std::vector<long> out;
  for (long k = lo; k <= hi; ++k) out.push_back(k);
  return out;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void SimConfig::validate() const {
  if (n_agents < 2) throw std::invalid_argument("n_agents must be >= 2");
  if (slots < 1) throw std::invalid_argument("slots must be >= 1");
  double r = rho();
  if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("lambda / n_agents must lie in (0, 1)");
}

SimStats simulate(const SimConfig& config, const MarketParams& params,
                  const OperatorStrategy& strategy) {
  config.validate();
  const int n = config.n_agents;
  const double rho = config.rho();

  std::vector<double> client_theta, host_theta;
  {
    auto rng = stream_for(config.seed, 0);
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      double u = (static_cast<double>(i) + jitter(rng)) / static_cast<double>(n);
      double theta = params.type_distribution.quantile(u);
      switch (config.state.membership_of(theta)) {
        case Membership::client: client_theta.push_back(theta); break;
        case Membership::host: host_theta.push_back(theta); break;
        case Membership::alien: break;
      }
    }
  }

  SimStats stats;
  stats.seed = config.seed;
  stats.n_agents = n;
  stats.lambda = config.lambda;
  stats.slots = config.slots;
  stats.n_clients = static_cast<int>(client_theta.size());
  stats.n_hosts = static_cast<int>(host_theta.size());
  const int hosts = stats.n_hosts;
  const double margin = strategy.p * (1.0 - strategy.delta) - params.omega;

  SlotMoments p_h, y_c, revenue;
  std::vector<long> served_by(hosts);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (long t = 0; t < config.slots; ++t) {
    auto rng = stream_for(config.seed, static_cast<std::uint64_t>(t) + 1);
    std::fill(served_by.begin(), served_by.end(), 0L);
    long connected = 0, bytes = 0;

    if (hosts > 0) {
      std::binomial_distribution<int> met_hosts(hosts, rho);
      std::uniform_int_distribution<int> pick(0, hosts - 1);
      for (double theta : client_theta) {
        if (met_hosts(rng) == 0) continue;
        ++served_by[pick(rng)];
        ++connected;
        if (unit(rng) < theta) ++bytes;
      }
    }
    for (double theta : host_theta) {
      if (unit(rng) < theta) ++bytes;
    }

    long host_side = 0;
    for (long c : served_by) host_side += c;
    if (host_side != connected) stats.flow_conserved = false;
    stats.connections += connected;

    p_h.add(stats.n_clients > 0 ? static_cast<double>(connected) / stats.n_clients : 0.0);
    y_c.add(hosts > 0 ? static_cast<double>(host_side) / hosts : 0.0);
    revenue.add(static_cast<double>(bytes) * margin / n);
  }

  stats.p_h = p_h.estimate();
  stats.y_c = y_c.estimate();
  stats.revenue = revenue.estimate();
  return stats;
}

ValidationReport compare_with_theory(const SimStats& stats, const MembershipState& state,
                                     const MarketParams& params, const OperatorStrategy& strategy,
                                     double k_sigma) {
  if (!(k_sigma > 0.0)) throw std::invalid_argument("k_sigma must be > 0");
  if (stats.n_agents < 2) throw std::invalid_argument("stats carry no population size");
  const int n = stats.n_agents;
  const double lambda = stats.lambda;
  const double rho = lambda / n;

  double ph = meeting_prob(state.mu_h, lambda);
  // With no hosts the per-host load is empty on both sides, not its mu_h -> 0 limit.
  double yc = state.mu_h > 0.0 ? clients_per_host(state.mu_c, state.mu_h, lambda) : 0.0;
  auto means = class_means(state, params.type_distribution);
  double margin = strategy.p * (1.0 - strategy.delta) - params.omega;
  double client_demand = state.mu_c * means.theta_bar_c;
  double rev = (state.mu_h * means.theta_bar_h + ph * client_demand) * margin;

  // Sorted partitions have one interior boundary for hosts and two for clients.
  auto host_counts = count_range(state.mu_h, n, 1);
  auto client_counts = count_range(state.mu_c, n, 2);
  double bias_ph = 0.0, bias_yc = 0.0;
  for (long h : host_counts) {
    double pf = finite_meeting_prob(h, rho);
    bias_ph = std::max(bias_ph, std::abs(pf - ph));
    for (long c : client_counts) {
      double yf = h > 0 ? static_cast<double>(c) / static_cast<double>(h) * pf : 0.0;
      bias_yc = std::max(bias_yc, std::abs(yf - yc));
    }
  }
  // Stratified types put each class's type sum within a few units of its
  // population integral: one unit for stratum jitter plus boundary agents.
  double bias_rev = std::abs(margin) * (bias_ph * client_demand + 5.0 / n);

  auto row = [&](const char* name, double theory, const Estimate& est, double bias) {
    ComparisonRow r;
    r.quantity = name;
    r.theory = theory;
    r.estimate = est.value;
    r.half_width = est.half_width;
    r.bias_bound = bias;
    r.pass = std::abs(est.value - theory) <= k_sigma * est.half_width + bias;
    return r;
  };

  ValidationReport report;
  report.seed = stats.seed;
  report.rows.push_back(row("P_H", ph, stats.p_h, bias_ph));
  report.rows.push_back(row("Y_c", yc, stats.y_c, bias_yc));
  report.rows.push_back(row("revenue", rev, stats.revenue, bias_rev));
  return report;
}

bool ValidationReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
}

void write_report_csv(std::ostream& os, const ValidationReport& report) {
  csv::write_row(os, {"quantity", "theory", "estimate", "half_width", "bias_bound", "pass"});
  for (const auto& r : report.rows) {
    csv::write_row(os, {r.quantity, csv::format(r.theory), csv::format(r.estimate),
                        csv::format(r.half_width), csv::format(r.bias_bound),
                        csv::format(r.pass)});
  }
}

}  // namespace upn
