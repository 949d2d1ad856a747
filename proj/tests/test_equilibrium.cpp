#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "upn/equilibrium.hpp"

using namespace upn;

namespace {

// Host costs no type can recover, and clients never gain.
MarketParams prohibitive() {
  auto m = MarketParams::baseline();
  m.c_h = 100.0;
  m.c_c = 50.0;
  return m;
}

// Instance with several equilibria: the empty network is self-consistent,
// and so are networks large enough to pay for hosting through forwarding.
struct MultiRootFixture {
  MarketParams params;
  OperatorStrategy strategy{7.6, 0.8};
  MultiRootFixture() {
    params = MarketParams::baseline();
    params.c_h = 14.8;
    params.c_c = 0.4;
    params.lambda = 13.0;
  }
};

}  // namespace

TEST_SUITE("equilibrium") {

TEST_CASE("thresholds at the empty network") {
  auto m = MarketParams::baseline();
  auto th = thresholds(MembershipState::all_alien(), m, {2.0, 0.4});
  CHECK(th.closed_form_valid);
  CHECK(th.theta_a == doctest::Approx(5.0 / 13.3).epsilon(1e-14));
  CHECK(th.theta_h == doctest::Approx(5.0 / 13.3).epsilon(1e-14));
}

TEST_CASE("free client membership puts theta_a at 0") {
  auto m = MarketParams::baseline();
  m.c_c = 0.0;
  auto state = MembershipState::from_fractions(0.3, 0.3, m.type_distribution);
  auto th = thresholds(state, m, {5.0, 0.5});
  CHECK(th.theta_a == 0.0);
}

TEST_CASE("large forwarding reward clamps the host ratio") {
  auto m = MarketParams::baseline();
  m.lambda = 10.0;
  OperatorStrategy s{9.0, 1.0};
  auto state = MembershipState::from_fractions(0.8, 0.05, m.type_distribution);
  auto env = environment(state, m, s);
  double reward = env.theta_bar_c * env.clients_per_host * env.benefits.pi_h_tilde;
  REQUIRE(reward >= m.c_h);
  auto th = thresholds(env, m);
  double pc = env.meeting_prob * env.benefits.pi_c;
  double expect = std::clamp((m.c_h - m.c_c - reward) / (env.benefits.pi_h - pc), 0.0, 1.0);
  CHECK(th.theta_h == doctest::Approx(expect));
  CHECK((m.c_h - reward) / env.benefits.pi_h <= 0.0);
}

TEST_CASE("best response examples") {
  auto m = MarketParams::baseline();
  OperatorStrategy s{2.0, 0.4};
  auto next = best_response(MembershipState::all_alien(), m, s);
  CHECK(next.mu_a == doctest::Approx(5.0 / 13.3).epsilon(1e-12));
  CHECK(next.mu_c == 0.0);
  CHECK(next.mu_h == doctest::Approx(1.0 - 5.0 / 13.3).epsilon(1e-12));

  auto eq = iterate_dynamics(MembershipState::all_alien(), m, s);
  REQUIRE(eq.converged);
  auto again = best_response(eq.state, m, s);
  CHECK(oracle::sup_distance(again, eq.state) <= 1e-9);

  auto off = best_response(MembershipState::from_fractions(0.2, 0.2, m.type_distribution),
                           prohibitive(), s);
  CHECK(off.mu_a == 1.0);
}

TEST_CASE("best response matches an exhaustive type scan") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int bins = 20000;
  for (int i = 0; i < 200; ++i) {
    auto d = oracle::assumption_draw(rng);
    double mu_h = 0.9 * u(rng), mu_c = (1.0 - mu_h) * u(rng);
    auto state = MembershipState::from_fractions(mu_c, mu_h, d.params.type_distribution);
    auto br = best_response(state, d.params, d.strategy);
    auto [c, h] = oracle::scan_best_response(state.mu_c, state.mu_h, d.params, d.strategy, bins);
    CHECK(std::abs(br.mu_c - c) <= 2.0 / bins);
    CHECK(std::abs(br.mu_h - h) <= 2.0 / bins);
  }
}

TEST_CASE("general partition") {
  auto m = MarketParams::baseline();
  SUBCASE("negative client benefit leaves no clients") {
    OperatorStrategy s{12.0, 0.5};
    auto state = MembershipState::from_fractions(0.2, 0.3, m.type_distribution);
    auto env = environment(state, m, s);
    REQUIRE(env.benefits.pi_c < 0.0);
    auto part = general_partition(m, s, env);
    CHECK(part.mu_c == 0.0);
    double reward = env.theta_bar_c * env.clients_per_host * env.benefits.pi_h_tilde;
    double split = std::clamp((m.c_h - reward) / env.benefits.pi_h, 0.0, 1.0);
    CHECK(part.mu_h == doctest::Approx(1.0 - split).epsilon(1e-12));
  }
  SUBCASE("flat positive host line takes everyone") {
    auto mm = m;
    mm.v_bar_h = 8.0;
    mm.gamma_h = 0.5;
    mm.c_h = 1.5;
    mm.lambda = 10.0;
    OperatorStrategy s{7.5, 0.0};
    auto base = MembershipState::from_fractions(0.6, 0.2, mm.type_distribution);
    auto env = environment(base, mm, s);
    env.benefits.pi_h = 0.0;
    env.benefits.pi_h_tilde = 10.0;
    REQUIRE(env.theta_bar_c * env.clients_per_host * 10.0 > mm.c_h);
    auto part = general_partition(mm, s, env);
    CHECK(part.mu_h == 1.0);
  }
  SUBCASE("agrees with best response under the standing assumptions") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      auto d = oracle::assumption_draw(rng);
      double mu_h = u(rng), mu_c = (1.0 - mu_h) * u(rng);
      auto state = MembershipState::from_fractions(mu_c, mu_h, d.params.type_distribution);
      auto env = environment(state, d.params, d.strategy);
      auto gp = general_partition(d.params, d.strategy, env);
      auto br = best_response(state, d.params, d.strategy);
      CHECK(std::abs(gp.mu_c - br.mu_c) < 1e-12);
      CHECK(std::abs(gp.mu_h - br.mu_h) < 1e-12);
    }
  }
  SUBCASE("pointwise argmax when assumptions fail") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      auto mm = MarketParams::baseline();
      mm.c_c = 3.0 * u(rng);
      mm.c_h = mm.c_c + 6.0 * u(rng) + 1e-3;
      mm.lambda = 10.0 * u(rng);
      OperatorStrategy s{15.0 * u(rng), u(rng)};
      double mu_h = u(rng), mu_c = (1.0 - mu_h) * u(rng);
      auto state = MembershipState::from_fractions(mu_c, mu_h, mm.type_distribution);
      auto env = environment(state, mm, s);
      auto part = general_partition(mm, s, env);
      CHECK(part.mu_a + part.mu_c + part.mu_h == doctest::Approx(1.0).epsilon(1e-12));
      for (int k = 0; k < 50; ++k) {
        double theta = u(rng);
        double ua = 0.0, uc = payoff(theta, Membership::client, env, mm),
               uh = payoff(theta, Membership::host, env, mm);
        double chosen = payoff(theta, part.membership_of(theta), env, mm);
        CHECK(chosen >= std::max({ua, uc, uh}) - 1e-9);
      }
    }
  }
}

TEST_CASE("dynamics on the reference strategy") {
  auto m = MarketParams::baseline();
  OperatorStrategy s{2.0, 0.4};
  auto r = iterate_dynamics(MembershipState::all_alien(), m, s);
  REQUIRE(r.converged);
  CHECK(r.residual <= 1e-9);
  CHECK(verify_equilibrium(r.state, m, s, 1e-9));
  CHECK(r.trajectory.front().mu_a == 1.0);
  CHECK(r.trajectory.size() == r.trajectory_thresholds.size());

  for (std::size_t i = 0; i + 1 < r.trajectory.size(); ++i) {
    const auto& x = r.trajectory[i];
    CHECK(x.mu_a + x.mu_c + x.mu_h == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.trajectory_thresholds[i].theta_a <= r.trajectory_thresholds[i].theta_h);
  }

  auto roots = grid_oracle(m, s, 1000);
  REQUIRE(!roots.empty());
  double best = 1.0;
  for (const auto& x : roots) best = std::min(best, oracle::sup_distance(x, r.state));
  CHECK(best < 1e-8);

  auto again = iterate_dynamics(r.state, m, s);
  CHECK(again.converged);
  CHECK(again.iterations == 1);

  auto twice = iterate_dynamics(MembershipState::all_alien(), m, s);
  REQUIRE(twice.trajectory.size() == r.trajectory.size());
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    CHECK(twice.trajectory[i].mu_c == r.trajectory[i].mu_c);
    CHECK(twice.trajectory[i].mu_h == r.trajectory[i].mu_h);
  }
}

TEST_CASE("prohibitive costs") {
  auto m = prohibitive();
  OperatorStrategy s{2.0, 0.4};
  auto r = iterate_dynamics(MembershipState::all_alien(), m, s);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(r.trajectory.size() == 1);
  CHECK(r.state.mu_a == 1.0);
  CHECK(verify_equilibrium(MembershipState::all_alien(), m, s, 1e-12));

  auto roots = grid_oracle(m, s, 200);
  REQUIRE(roots.size() == 1);
  CHECK(roots.front().mu_a == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("non-converged runs stop mid-trajectory") {
  auto m = MarketParams::baseline();
  OperatorStrategy s{2.0, 0.4};
  auto r = iterate_dynamics(MembershipState::all_alien(), m, s, {1e-9, 3, 1.0, true});
  CHECK_FALSE(r.converged);
  CHECK_FALSE(verify_equilibrium(r.state, m, s, 1e-9));
  CHECK_FALSE(verify_equilibrium(r.trajectory[1], m, s, 1e-9));
  CHECK_THROWS_AS(iterate_dynamics(r.state, m, s, {0.0, 10, 1.0, true}), std::invalid_argument);
  CHECK_THROWS_AS(iterate_dynamics(r.state, m, s, {1e-9, 10, 1.5, true}), std::invalid_argument);
}

TEST_CASE("damping settles a best-response cycle") {
  auto m = MarketParams::baseline();
  m.c_c = 1.879;
  m.c_h = 8.501;
  m.lambda = 4.698;
  OperatorStrategy s{4.942, 0.288};
  auto plain = iterate_dynamics(MembershipState::all_alien(), m, s, {1e-9, 2000, 1.0, false});
  CHECK_FALSE(plain.converged);
  auto damped = iterate_dynamics(MembershipState::all_alien(), m, s, {1e-9, 10000, 0.5, false});
  REQUIRE(damped.converged);
  CHECK(verify_equilibrium(damped.state, m, s, 1e-9));
  auto roots = grid_oracle(m, s, 1000);
  double best = 1.0;
  for (const auto& x : roots) best = std::min(best, oracle::sup_distance(x, damped.state));
  CHECK(best < 1e-6);
}

TEST_CASE("multiple equilibria regression") {
  MultiRootFixture fx;
  auto roots = grid_oracle(fx.params, fx.strategy, 400);
  REQUIRE(roots.size() >= 2);
  for (const auto& x : roots) CHECK(verify_equilibrium(x, fx.params, fx.strategy, 1e-9));
  CHECK(roots.front().mu_a == doctest::Approx(1.0));
  // The dynamics start from the empty network and stay there.
  auto r = iterate_dynamics(MembershipState::all_alien(), fx.params, fx.strategy);
  CHECK(r.converged);
  CHECK(r.state.mu_a == 1.0);
}

TEST_CASE("existence across random configurations") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20; ++i) {
    auto d = oracle::assumption_draw(rng);
    CHECK_FALSE(grid_oracle(d.params, d.strategy, 200).empty());
  }
}

TEST_CASE("non-uniform types") {
  auto m = MarketParams::baseline();
  m.type_distribution = TypeDistribution::beta(2.0, 3.0);
  OperatorStrategy s{3.0, 0.5};
  auto r = iterate_dynamics(MembershipState::all_alien(), m, s, {1e-9, 10000, 0.5, false});
  REQUIRE(r.converged);
  CHECK(verify_equilibrium(r.state, m, s, 1e-9));
  CHECK(std::abs(m.type_distribution.mass(r.state.host_intervals) - r.state.mu_h) < 1e-9);
  auto roots = grid_oracle(m, s, 100);
  double best = 1.0;
  for (const auto& x : roots) best = std::min(best, oracle::sup_distance(x, r.state));
  CHECK(best < 1e-6);
}

TEST_CASE("trajectory csv") {
  auto m = MarketParams::baseline();
  auto r = iterate_dynamics(MembershipState::all_alien(), m, {2.0, 0.4});
  std::ostringstream os;
  write_trajectory_csv(os, r);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "iter,mu_a,mu_c,mu_h,theta_a,theta_h,residual");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(r.trajectory.size()));
  CHECK(os.str().find('\r') == std::string::npos);
}

}
