#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "upn/montecarlo.hpp"

using namespace upn;

namespace {

MembershipState reference_state() {
  return MembershipState::from_fractions(0.47, 0.38, TypeDistribution());
}

}  // namespace

TEST_SUITE("montecarlo") {

TEST_CASE("config validation") {
  SimConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_agents = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SimConfig{};
  c.slots = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SimConfig{};
  c.n_agents = 4;
  c.lambda = 4.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("no hosts, no meetings") {
  auto m = MarketParams::baseline();
  SimConfig c{2000, 5.0, 200, 3, MembershipState::from_fractions(0.5, 0.0, TypeDistribution())};
  auto stats = simulate(c, m, {2.0, 0.4});
  CHECK(stats.n_hosts == 0);
  CHECK(stats.p_h.value == 0.0);
  CHECK(stats.y_c.value == 0.0);
  auto report = compare_with_theory(stats, c.state, m, {2.0, 0.4}, 3.0);
  CHECK(report.all_pass());
  CHECK(report.rows[0].theory == 0.0);
  CHECK(report.rows[1].theory == 0.0);
}

TEST_CASE("reference run matches the closed forms") {
  auto m = MarketParams::baseline();
  OperatorStrategy s{2.0, 0.4};
  SimConfig c{5000, 5.0, 10000, 1, reference_state()};
  auto stats = simulate(c, m, s);
  CHECK(stats.flow_conserved);
  CHECK(std::abs(stats.p_h.value - 0.8504) <= 3 * stats.p_h.half_width + 2e-4);
  // Within 2% of the large-network clients per host.
  CHECK(std::abs(stats.y_c.value - 1.051849) / 1.051849 < 0.02);
  auto report = compare_with_theory(stats, c.state, m, s, 3.0);
  for (const auto& r : report.rows) {
    INFO(r.quantity);
    CHECK(r.pass);
  }
  CHECK(report.seed == 1);
}

TEST_CASE("bias bound covers the finite-population expectation") {
  auto m = MarketParams::baseline();
  OperatorStrategy s{2.0, 0.4};
  SimConfig c{5000, 5.0, 2, 1, reference_state()};
  auto stats = simulate(c, m, s);
  auto report = compare_with_theory(stats, c.state, m, s, 3.0);
  double finite = 1.0 - std::pow(1.0 - 5.0 / 5000.0, stats.n_hosts);
  CHECK(report.rows[0].bias_bound >= std::abs(finite - report.rows[0].theory) - 1e-15);
  CHECK(report.rows[0].bias_bound >=
        std::abs(oracle::finite_meeting_prob(0.38, 5.0, 5000.0) - report.rows[0].theory) - 1e-4);
}

TEST_CASE("seed determinism") {
  auto m = MarketParams::baseline();
  SimConfig c{500, 5.0, 1, 42, reference_state()};
  auto a = simulate(c, m, {2.0, 0.4});
  auto b = simulate(c, m, {2.0, 0.4});
  CHECK(a.p_h.value == b.p_h.value);
  CHECK(a.y_c.value == b.y_c.value);
  CHECK(a.revenue.value == b.revenue.value);
  CHECK(a.connections == b.connections);
  CHECK(a.p_h.half_width == 0.0);
  c.seed = 43;
  c.slots = 50;
  auto d = simulate(c, m, {2.0, 0.4});
  c.seed = 42;
  auto e = simulate(c, m, {2.0, 0.4});
  CHECK(d.p_h.value != e.p_h.value);
}

TEST_CASE("mismatched theory is flagged") {
  auto m = MarketParams::baseline();
  OperatorStrategy s{2.0, 0.4};
  SimConfig c{5000, 5.0, 2000, 7, reference_state()};
  auto stats = simulate(c, m, s);
  auto wrong = MembershipState::from_fractions(0.47, 0.28, TypeDistribution());
  auto report = compare_with_theory(stats, wrong, m, s, 3.0);
  CHECK_FALSE(report.all_pass());
  CHECK_FALSE(report.rows[0].pass);
  CHECK(report.rows[0].quantity == "P_H");
  CHECK_THROWS_AS(compare_with_theory(stats, wrong, m, s, 0.0), std::invalid_argument);

  std::ostringstream os;
  write_report_csv(os, report);
  CHECK(os.str().rfind("quantity,theory,estimate,half_width,bias_bound,pass\nP_H,", 0) == 0);
}

TEST_CASE("minimal population") {
  auto m = MarketParams::baseline();
  SimConfig c{2, 1.9, 500, 1, MembershipState::from_fractions(0.5, 0.5, TypeDistribution())};
  auto stats = simulate(c, m, {2.0, 0.4});
  CHECK(stats.n_clients + stats.n_hosts == 2);
  auto report = compare_with_theory(stats, c.state, m, {2.0, 0.4}, 3.0);
  CHECK(report.rows.size() == 3);
  CHECK(report.rows[0].bias_bound > 0.01);
}

TEST_CASE("gap to the large-network limit shrinks with N") {
  auto m = MarketParams::baseline();
  OperatorStrategy s{2.0, 0.4};
  double theory = meeting_prob(0.38, 5.0);
  double gap_small = 0.0, gap_large = 0.0;
  // Equal agent-slot budgets.
  for (std::uint64_t seed : {1, 2, 3}) {
    auto small = simulate({500, 5.0, 2000, seed, reference_state()}, m, s);
    auto large = simulate({50000, 5.0, 20, seed, reference_state()}, m, s);
    gap_small += std::abs(small.p_h.value - theory);
    gap_large += std::abs(large.p_h.value - theory);
  }
  CHECK(gap_large < gap_small);
}

}
