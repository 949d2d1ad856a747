#include <doctest.h>

#include <random>
#include <sstream>

#include "upn/config.hpp"

using namespace upn;

namespace {

KeyValueConfig parse(const std::string& text) {
  std::istringstream in(text);
  return KeyValueConfig::parse(in);
}

std::string key_of(const std::string& text) {
  try {
    run_config_from(parse(text));
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("parsing") {
  auto c = parse("# comment\n\nparams.lambda = 7\n  run.p=2.5  \nrun.var = delta\n");
  CHECK(c.get_double("params.lambda") == 7.0);
  CHECK(c.get_double("run.p") == 2.5);
  CHECK(c.get_string("run.var") == "delta");
  CHECK_FALSE(c.get_double("run.delta").has_value());

  CHECK_THROWS_AS(parse("params.lambda 7\n"), ConfigError);
  CHECK_THROWS_AS(parse("run.p = 1\nrun.p = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("run.p = 1.5\n").get_integer("run.p"), ConfigError);
  CHECK_THROWS_AS(parse("run.p = 1x\n").get_double("run.p"), ConfigError);
}

TEST_CASE("defaults") {
  auto rc = run_config_from(parse(""));
  CHECK(rc.params.lambda == 5.0);
  CHECK(rc.params.p_max == 15.0);
  CHECK(rc.p_steps == 144);
  CHECK(rc.delta_steps == 101);
  CHECK(rc.seed == 1);
  CHECK_FALSE(rc.p.has_value());

  auto raised = run_config_from(parse("params.v_bar_h = 20\n"));
  CHECK(raised.params.p_max == 20.0);
}

TEST_CASE("errors name the offending key") {
  CHECK(key_of("params.foo = 1\n") == "params.foo");
  CHECK(key_of("run.colour = red\n") == "run.colour");
  CHECK(key_of("lambda = 1\n") == "lambda");
  CHECK(key_of("params.c_h = 0.5\n") == "params.c_h");
  CHECK(key_of("params.type_distribution = cauchy\n") == "params.type_distribution");
  CHECK(key_of("run.seed = -1\n") == "run.seed");
  CHECK(key_of("params.omega = abc\n") == "params.omega");
  CHECK(key_of("params.lambda = 3\n").empty());
}

TEST_CASE("parameter round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const char* dists[] = {"uniform", "beta:2,3.5", "piecewise:0.25,1.75"};
  for (int i = 0; i < 200; ++i) {
    MarketParams m;
    m.v_bar_h = 30 * u(rng);
    m.v_bar_c = 30 * u(rng);
    m.c_c = 5 * u(rng);
    m.c_h = m.c_c + 5 * u(rng) + 1e-6;
    m.gamma_h = u(rng);
    m.gamma_hc = u(rng);
    m.gamma_c = u(rng);
    m.omega = u(rng);
    m.lambda = 20 * u(rng);
    m.p_max = 1e-3 + 30 * u(rng);
    m.type_distribution = TypeDistribution::parse(dists[i % 3]);
    std::ostringstream os;
    write_params(os, m);
    std::istringstream in(os.str());
    auto back = params_from_config(KeyValueConfig::parse(in));
    CHECK(back.v_bar_h == m.v_bar_h);
    CHECK(back.v_bar_c == m.v_bar_c);
    CHECK(back.c_h == m.c_h);
    CHECK(back.c_c == m.c_c);
    CHECK(back.gamma_h == m.gamma_h);
    CHECK(back.gamma_hc == m.gamma_hc);
    CHECK(back.gamma_c == m.gamma_c);
    CHECK(back.omega == m.omega);
    CHECK(back.lambda == m.lambda);
    CHECK(back.p_max == m.p_max);
    CHECK(back.type_distribution == m.type_distribution);
  }
}

}
