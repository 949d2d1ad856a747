#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "upn/market_model.hpp"

namespace upn {

/// Bad or unknown configuration entry. `key()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat `key = value` file. Blank lines and lines starting with '#' are
/// ignored; keys carry a section prefix (`params.` or `run.`).
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::optional<double> get_double(const std::string& key) const;
  std::optional<long> get_integer(const std::string& key) const;
  std::optional<std::string> get_string(const std::string& key) const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Command options read from `run.*` keys; unset fields fall back to defaults.
struct RunConfig {
  MarketParams params;
  std::optional<double> p;
  std::optional<double> delta;
  double tol = 1e-9;
  int max_iter = 10000;
  double damping = 1.0;
  std::optional<std::string> var;
  std::optional<double> from;
  std::optional<double> to;
  std::optional<int> steps;
  int p_steps = 144;
  int delta_steps = 101;
  std::optional<double> lambda_from;
  std::optional<double> lambda_to;
  std::optional<int> lambda_steps;
  int agents = 5000;
  long slots = 10000;
  std::uint64_t seed = 1;
  double k_sigma = 3.0;
  std::optional<double> mu_c;
  std::optional<double> mu_h;
};

/// Builds market parameters from `params.*` keys over the baseline values.
/// When `params.p_max` is absent it defaults to `params.v_bar_h`. Every key
/// outside the known `params.*` and `run.*` sets is a ConfigError.
MarketParams params_from_config(const KeyValueConfig& config);
RunConfig run_config_from(const KeyValueConfig& config);

/// Serializes parameters as `params.*` lines readable by params_from_config.
void write_params(std::ostream& os, const MarketParams& params);

}  // namespace upn
