#include "upn/equilibrium.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "upn/csv.hpp"

namespace upn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// num/den with the sign of num deciding the limit when den is not positive.
double signed_ratio(double num, double den) {
  if (den > 0.0) return num / den;
  return num > 0.0 ? kInf : -kInf;
}

// The three payoff lines U_A = 0, U_C = client_slope*theta - c_c and
// U_H = host_slope*theta + host_intercept.
struct PayoffLines {
  double client_slope;
  double client_intercept;
  double host_slope;
  double host_intercept;

  PayoffLines(const MarketEnvironment& env, const MarketParams& params)
      : client_slope(env.meeting_prob * env.benefits.pi_c),
        client_intercept(-params.c_c),
        host_slope(env.benefits.pi_h),
        host_intercept(env.theta_bar_c * env.clients_per_host * env.benefits.pi_h_tilde -
                       params.c_h) {}

  std::array<double, 3> at(double theta) const {
    return {0.0, client_slope * theta + client_intercept, host_slope * theta + host_intercept};
  }
};

struct Segment {
  double lo;
  double hi;
  Membership membership;
};

// Pointwise argmax of three lines over [0,1]: at most three crossings, so at
// most four segments. Exact ties over a whole segment prefer alien, then client.
struct ArgmaxPlan {
  std::array<Segment, 4> segments{};
  int count = 0;
};

ArgmaxPlan argmax_plan(const PayoffLines& lines) {
  std::array<double, 5> cuts{};
  int n_cuts = 0;
  cuts[n_cuts++] = 0.0;
  auto add_cut = [&](double slope_diff, double intercept_diff) {
    if (slope_diff == 0.0) return;
    double t = -intercept_diff / slope_diff;
    if (t > 0.0 && t < 1.0) cuts[n_cuts++] = t;
  };
  add_cut(lines.client_slope, lines.client_intercept);
  add_cut(lines.host_slope, lines.host_intercept);
  add_cut(lines.host_slope - lines.client_slope, lines.host_intercept - lines.client_intercept);
  cuts[n_cuts++] = 1.0;
  std::sort(cuts.begin(), cuts.begin() + n_cuts);

  ArgmaxPlan plan;
  for (int i = 0; i + 1 < n_cuts; ++i) {
    double lo = cuts[i], hi = cuts[i + 1];
    if (!(hi > lo)) continue;
    auto u = lines.at(0.5 * (lo + hi));
    Membership best = Membership::alien;
    double best_value = u[0];
    if (u[1] > best_value) {
      best = Membership::client;
      best_value = u[1];
    }
    if (u[2] > best_value) best = Membership::host;
    if (plan.count > 0 && plan.segments[plan.count - 1].membership == best) {
      plan.segments[plan.count - 1].hi = hi;
    } else {
      plan.segments[plan.count++] = Segment{lo, hi, best};
    }
  }
  return plan;
}

struct Fractions {
  double mu_c;
  double mu_h;
};

// Best-response fractions under the uniform density, without building intervals.
Fractions uniform_response(const MarketEnvironment& env, const MarketParams& params) {
  auto th = thresholds(env, params);
  if (th.closed_form_valid) return {th.theta_h - th.theta_a, 1.0 - th.theta_h};
  auto plan = argmax_plan(PayoffLines(env, params));
  Fractions f{0.0, 0.0};
  for (int i = 0; i < plan.count; ++i) {
    const auto& s = plan.segments[i];
    if (s.membership == Membership::client) f.mu_c += s.hi - s.lo;
    if (s.membership == Membership::host) f.mu_h += s.hi - s.lo;
  }
  return f;
}

// Environment of the sorted partition with the given fractions.
MarketEnvironment sorted_environment(double mu_c, double mu_h, const MarketParams& params,
                                     const OperatorStrategy& strategy) {
  if (!params.type_distribution.is_uniform()) {
    return environment(MembershipState::from_fractions(mu_c, mu_h, params.type_distribution),
                       params, strategy);
  }
  MarketEnvironment env;
  env.benefits = unit_benefits(params, strategy);
  env.meeting_prob = meeting_prob(mu_h, params.lambda);
  env.clients_per_host = clients_per_host(mu_c, mu_h, params.lambda);
  env.theta_bar_c = mu_c > 0.0 ? (2.0 - 2.0 * mu_h - mu_c) / 2.0 : 0.0;
  env.theta_bar_h = mu_h > 0.0 ? (2.0 - mu_h) / 2.0 : 0.0;
  return env;
}

Fractions sorted_response(double mu_c, double mu_h, const MarketParams& params,
                          const OperatorStrategy& strategy) {
  auto env = sorted_environment(mu_c, mu_h, params, strategy);
  if (params.type_distribution.is_uniform()) return uniform_response(env, params);
  auto next = best_response(MembershipState::from_fractions(mu_c, mu_h, params.type_distribution),
                            params, strategy);
  return {next.mu_c, next.mu_h};
}

double sup_gap(const MembershipState& a, const MembershipState& b) {
  return std::max(std::abs(a.mu_c - b.mu_c), std::abs(a.mu_h - b.mu_h));
}

MembershipState response_from_env(const MarketEnvironment& env, const Thresholds& th,
                                  const MarketParams& params, const OperatorStrategy& strategy) {
  if (th.closed_form_valid) {
    return MembershipState::from_thresholds(th.theta_a, th.theta_h, params.type_distribution);
  }
  return general_partition(params, strategy, env);
}

}  // namespace

DegenerateOrdering::DegenerateOrdering(double a, double h)
    : std::runtime_error("threshold ordering violated: theta_a=" + csv::format(a) +
                         " > theta_h=" + csv::format(h)),
      theta_a(a),
      theta_h(h) {}

Thresholds thresholds(const MarketEnvironment& env, const MarketParams& params,
                      ThresholdMode mode) {
  const auto& b = env.benefits;
  double client_slope = env.meeting_prob * b.pi_c;
  double reward = env.theta_bar_c * env.clients_per_host * b.pi_h_tilde;

  double client_ratio = client_slope > 0.0 ? params.c_c / client_slope : kInf;
  double host_ratio = signed_ratio(params.c_h - reward, b.pi_h);
  double cross_ratio = signed_ratio(params.c_h - params.c_c - reward, b.pi_h - client_slope);

  Thresholds th;
  th.theta_a = clamp01(std::min(client_ratio, host_ratio));
  th.theta_h = clamp01(std::max(host_ratio, cross_ratio));
  th.closed_form_valid = b.pi_h > 0.0 && b.pi_h > client_slope;
  if (mode == ThresholdMode::diagnostic && th.theta_a > th.theta_h) {
    throw DegenerateOrdering(th.theta_a, th.theta_h);
  }
  return th;
}

Thresholds thresholds(const MembershipState& state, const MarketParams& params,
                      const OperatorStrategy& strategy, ThresholdMode mode) {
  return thresholds(environment(state, params, strategy), params, mode);
}

MembershipState general_partition(const MarketParams& params, const OperatorStrategy&,
                                  const MarketEnvironment& env) {
  auto plan = argmax_plan(PayoffLines(env, params));
  IntervalList clients, hosts;
  for (int i = 0; i < plan.count; ++i) {
    const auto& s = plan.segments[i];
    if (s.membership == Membership::client) clients.push_back({s.lo, s.hi});
    if (s.membership == Membership::host) hosts.push_back({s.lo, s.hi});
  }
  return MembershipState::from_intervals(std::move(clients), std::move(hosts),
                                         params.type_distribution);
}

MembershipState best_response(const MembershipState& state, const MarketParams& params,
                              const OperatorStrategy& strategy) {
  auto env = environment(state, params, strategy);
  return response_from_env(env, thresholds(env, params), params, strategy);
}

double displacement(const MembershipState& state, const MarketParams& params,
                    const OperatorStrategy& strategy) {
  return sup_gap(best_response(state, params, strategy), state);
}

EquilibriumResult iterate_dynamics(const MembershipState& initial, const MarketParams& params,
                                   const OperatorStrategy& strategy,
                                   const DynamicsOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (options.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    throw std::invalid_argument("damping must lie in (0, 1]");
  }

  EquilibriumResult result;
  result.damping = options.damping;
  result.trajectory.push_back(initial);

  MembershipState current = initial;
  double last_gap = std::numeric_limits<double>::quiet_NaN();
  for (int it = 1; it <= options.max_iter; ++it) {
    auto env = environment(current, params, strategy);
    auto th = thresholds(env, params);
    auto next = response_from_env(env, th, params, strategy);
    last_gap = sup_gap(next, current);
    if (options.record_trajectory) {
      result.trajectory_thresholds.push_back(th);
      result.trajectory_residuals.push_back(last_gap);
    }
    result.iterations = it;
    if (last_gap <= options.tol) {
      result.converged = true;
      result.state = current;
      result.env = env;
      result.residual = last_gap;
      break;
    }
    if (options.damping < 1.0) {
      double a = options.damping;
      next = MembershipState::from_fractions(current.mu_c + a * (next.mu_c - current.mu_c),
                                             current.mu_h + a * (next.mu_h - current.mu_h),
                                             params.type_distribution);
    }
    current = std::move(next);
    if (options.record_trajectory) result.trajectory.push_back(current);
  }

  if (!result.converged) {
    result.state = current;
    result.env = environment(current, params, strategy);
    result.residual = last_gap;
    if (options.record_trajectory) {
      // The last pushed state has not been evaluated yet.
      result.trajectory_thresholds.push_back(thresholds(result.env, params));
      result.trajectory_residuals.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }

  if (!options.record_trajectory) {
    result.trajectory.push_back(result.state);
    auto th_initial = thresholds(initial, params, strategy);
    result.trajectory_thresholds = {th_initial, thresholds(result.env, params)};
    result.trajectory_residuals = {std::numeric_limits<double>::quiet_NaN(), result.residual};
  }
  return result;
}

bool verify_equilibrium(const MembershipState& state, const MarketParams& params,
                        const OperatorStrategy& strategy, double tol) {
  return displacement(state, params, strategy) <= tol;
}

std::vector<MembershipState> grid_oracle(const MarketParams& params,
                                         const OperatorStrategy& strategy, int resolution) {
  if (resolution < 10) throw std::invalid_argument("grid_oracle resolution must be >= 10");

  auto residual = [&](double mu_c, double mu_h) {
    auto next = sorted_response(mu_c, mu_h, params, strategy);
    return std::max(std::abs(next.mu_c - mu_c), std::abs(next.mu_h - mu_h));
  };

  const int n = resolution + 1;
  const double step = 1.0 / resolution;
  std::vector<double> grid(static_cast<std::size_t>(n) * n, kInf);
  auto at = [&](int i, int j) -> double& { return grid[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; i + j <= resolution; ++j) at(i, j) = residual(i * step, j * step);
  }

  struct Candidate {
    double residual;
    int i;
    int j;
  };
  std::vector<Candidate> candidates;
  const double threshold = 2.0 / resolution;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; i + j <= resolution; ++j) {
      double r = at(i, j);
      if (!(r < threshold)) continue;
      bool is_min = true;
      for (int di = -1; di <= 1 && is_min; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          int ni = i + di, nj = j + dj;
          if ((di == 0 && dj == 0) || ni < 0 || nj < 0 || ni >= n || nj >= n) continue;
          if (at(ni, nj) < r) {
            is_min = false;
            break;
          }
        }
      }
      if (is_min) candidates.push_back({r, i, j});
    }
  }
  constexpr std::size_t kMaxCandidates = 512;
  if (candidates.size() > kMaxCandidates) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& x, const auto& y) { return x.residual < y.residual; });
    candidates.resize(kMaxCandidates);
  }

  auto project = [](double& c, double& h) {
    c = clamp01(c);
    h = std::clamp(h, 0.0, 1.0 - c);
  };
  auto displacement_vec = [&](double c, double h) {
    auto next = sorted_response(c, h, params, strategy);
    return std::array<double, 2>{next.mu_c - c, next.mu_h - h};
  };
  auto norm = [](const std::array<double, 2>& v) { return std::max(std::abs(v[0]), std::abs(v[1])); };

  constexpr double kRootTol = 1e-10;
  constexpr double kAcceptTol = 1e-9;

  struct Root {
    double mu_c;
    double mu_h;
    double residual;
  };
  std::vector<Root> roots;
  for (const auto& cand : candidates) {
    double c = cand.i * step, h = cand.j * step;
    auto f = displacement_vec(c, h);
    double fn = norm(f);

    // Newton on the displacement with a finite-difference Jacobian; the step is
    // bisected until the displacement decreases.
    for (int it = 0; it < 100 && fn > kRootTol; ++it) {
      constexpr double fd = 1e-8;
      double hc = (c + fd + h <= 1.0) ? fd : -fd;
      double hh = (c + h + fd <= 1.0) ? fd : -fd;
      auto fc = displacement_vec(c + hc, h);
      auto fh = displacement_vec(c, h + hh);
      double j00 = (fc[0] - f[0]) / hc, j10 = (fc[1] - f[1]) / hc;
      double j01 = (fh[0] - f[0]) / hh, j11 = (fh[1] - f[1]) / hh;
      double det = j00 * j11 - j01 * j10;
      if (det == 0.0 || !std::isfinite(det)) break;
      double sc = -(j11 * f[0] - j01 * f[1]) / det;
      double sh = -(-j10 * f[0] + j00 * f[1]) / det;
      bool improved = false;
      for (double t = 1.0; t > 1e-12; t *= 0.5) {
        double nc = c + t * sc, nh = h + t * sh;
        project(nc, nh);
        auto nf = displacement_vec(nc, nh);
        if (norm(nf) < fn) {
          c = nc;
          h = nh;
          f = nf;
          fn = norm(nf);
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }

    // Compass search on the displacement when Newton stalls at a kink.
    if (fn > kRootTol) {
      for (double s = step; s > 1e-14 && fn > kRootTol;) {
        bool moved = false;
        const double dirs[4][2] = {{s, 0.0}, {-s, 0.0}, {0.0, s}, {0.0, -s}};
        for (const auto& d : dirs) {
          double nc = c + d[0], nh = h + d[1];
          project(nc, nh);
          double nfn = norm(displacement_vec(nc, nh));
          if (nfn < fn) {
            c = nc;
            h = nh;
            fn = nfn;
            moved = true;
          }
        }
        if (!moved) s *= 0.5;
      }
    }
    if (fn <= kAcceptTol) roots.push_back({c, h, fn});
  }

  std::sort(roots.begin(), roots.end(), [](const Root& x, const Root& y) {
    return x.mu_h != y.mu_h ? x.mu_h < y.mu_h : x.mu_c < y.mu_c;
  });
  std::vector<Root> unique;
  for (const auto& r : roots) {
    auto dup = std::find_if(unique.begin(), unique.end(), [&](const Root& u) {
      return std::max(std::abs(u.mu_c - r.mu_c), std::abs(u.mu_h - r.mu_h)) <= 1e-7;
    });
    if (dup == unique.end()) {
      unique.push_back(r);
    } else if (r.residual < dup->residual) {
      *dup = r;
    }
  }

  std::vector<MembershipState> out;
  out.reserve(unique.size());
  for (const auto& r : unique) {
    out.push_back(MembershipState::from_fractions(r.mu_c, r.mu_h, params.type_distribution));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const EquilibriumResult& result) {
  csv::write_row(os, {"iter", "mu_a", "mu_c", "mu_h", "theta_a", "theta_h", "residual"});
  for (std::size_t t = 0; t < result.trajectory.size(); ++t) {
    const auto& s = result.trajectory[t];
    const auto& th = result.trajectory_thresholds.at(t);
    csv::write_row(os, {std::to_string(t), csv::format(s.mu_a), csv::format(s.mu_c),
                        csv::format(s.mu_h), csv::format(th.theta_a), csv::format(th.theta_h),
                        csv::format(result.trajectory_residuals.at(t))});
  }
}

}  // namespace upn
