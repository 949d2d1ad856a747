#include "upn/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "upn/csv.hpp"

namespace upn {

namespace {

constexpr std::array kParamKeys = {
    "params.v_bar_h", "params.v_bar_c",  "params.c_h",     "params.c_c",
    "params.gamma_h", "params.gamma_hc", "params.gamma_c", "params.omega",
    "params.lambda",  "params.p_max",    "params.type_distribution"};

constexpr std::array kRunKeys = {
    "run.p",           "run.delta",       "run.tol",          "run.max_iter",
    "run.damping",     "run.var",         "run.from",         "run.to",
    "run.steps",       "run.p_steps",     "run.delta_steps",  "run.lambda_from",
    "run.lambda_to",   "run.lambda_steps", "run.agents",      "run.slots",
    "run.seed",        "run.k_sigma",     "run.mu_c",         "run.mu_h"};

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_as(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ConfigError(key, "invalid value '" + text + "' for key '" + key + "'");
  }
  return value;
}

bool known_key(const std::string& key) {
  auto match = [&](const char* k) { return key == k; };
  return std::any_of(kParamKeys.begin(), kParamKeys.end(), match) ||
         std::any_of(kRunKeys.begin(), kRunKeys.end(), match);
}

}  // namespace

ConfigError::ConfigError(std::string key, const std::string& message)
    : std::runtime_error(message), key_(std::move(key)) {}

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no),
                        "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(body.substr(0, eq)));
    std::string value(trim(body.substr(eq + 1)));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no),
                        "line " + std::to_string(line_no) + ": empty key");
    }
    if (config.contains(key)) throw ConfigError(key, "duplicate key '" + key + "'");
    config.entries_[key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file '" + path.string() + "'");
  return parse(in);
}

std::optional<double> KeyValueConfig::get_double(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return parse_as<double>(key, it->second);
}

std::optional<long> KeyValueConfig::get_integer(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return parse_as<long>(key, it->second);
}

std::optional<std::string> KeyValueConfig::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

MarketParams params_from_config(const KeyValueConfig& config) {
  for (const auto& [key, value] : config.entries()) {
    if (!known_key(key)) throw ConfigError(key, "unknown configuration key '" + key + "'");
  }
  MarketParams p = MarketParams::baseline();
  auto read = [&](const char* key, double& field) {
    if (auto v = config.get_double(key)) field = *v;
  };
  read("params.v_bar_h", p.v_bar_h);
  read("params.v_bar_c", p.v_bar_c);
  read("params.c_h", p.c_h);
  read("params.c_c", p.c_c);
  read("params.gamma_h", p.gamma_h);
  read("params.gamma_hc", p.gamma_hc);
  read("params.gamma_c", p.gamma_c);
  read("params.omega", p.omega);
  read("params.lambda", p.lambda);
  p.p_max = p.v_bar_h;
  read("params.p_max", p.p_max);
  if (auto spec = config.get_string("params.type_distribution")) {
    try {
      p.type_distribution = TypeDistribution::parse(*spec);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("params.type_distribution", e.what());
    }
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    std::string what = e.what();
    throw ConfigError("params." + what.substr(0, what.find(':')), what);
  }
  return p;
}

RunConfig run_config_from(const KeyValueConfig& config) {
  RunConfig rc;
  rc.params = params_from_config(config);
  auto as_int = [&](const char* key) -> std::optional<int> {
    auto v = config.get_integer(key);
    if (!v) return std::nullopt;
    return static_cast<int>(*v);
  };
  rc.p = config.get_double("run.p");
  rc.delta = config.get_double("run.delta");
  if (auto v = config.get_double("run.tol")) rc.tol = *v;
  if (auto v = as_int("run.max_iter")) rc.max_iter = *v;
  if (auto v = config.get_double("run.damping")) rc.damping = *v;
  rc.var = config.get_string("run.var");
  rc.from = config.get_double("run.from");
  rc.to = config.get_double("run.to");
  rc.steps = as_int("run.steps");
  if (auto v = as_int("run.p_steps")) rc.p_steps = *v;
  if (auto v = as_int("run.delta_steps")) rc.delta_steps = *v;
  rc.lambda_from = config.get_double("run.lambda_from");
  rc.lambda_to = config.get_double("run.lambda_to");
  rc.lambda_steps = as_int("run.lambda_steps");
  if (auto v = as_int("run.agents")) rc.agents = *v;
  if (auto v = config.get_integer("run.slots")) rc.slots = *v;
  if (auto v = config.get_string("run.seed")) rc.seed = parse_as<std::uint64_t>("run.seed", *v);
  if (auto v = config.get_double("run.k_sigma")) rc.k_sigma = *v;
  rc.mu_c = config.get_double("run.mu_c");
  rc.mu_h = config.get_double("run.mu_h");
  return rc;
}

void write_params(std::ostream& os, const MarketParams& p) {
  auto line = [&](const char* key, double v) { os << key << " = " << csv::format(v) << '\n'; };
  line("params.v_bar_h", p.v_bar_h);
  line("params.v_bar_c", p.v_bar_c);
  line("params.c_h", p.c_h);
  line("params.c_c", p.c_c);
  line("params.gamma_h", p.gamma_h);
  line("params.gamma_hc", p.gamma_hc);
  line("params.gamma_c", p.gamma_c);
  line("params.omega", p.omega);
  line("params.lambda", p.lambda);
  line("params.p_max", p.p_max);
  os << "params.type_distribution = " << p.type_distribution.spec() << '\n';
}

}  // namespace upn
