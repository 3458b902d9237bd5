#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mixtrade/data.hpp"
#include "mixtrade/trainer.hpp"

namespace mixtrade {

// Flat `key = value` text: one pair per line, '#' starts a comment,
// blank lines are skipped, keys may appear once. Every tunable in the
// pipeline lives in this one namespace; unknown keys are rejected so a
// typo cannot silently fall back to a default.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

  // Throws ConfigError naming the first key outside the documented set.
  void reject_unknown_keys() const;

 private:
  std::map<std::string, std::string> kv_;
};

// The full documented key set (sorted), shared by every command.
const std::vector<std::string>& known_config_keys();

// Trainer settings from a parsed config, every default preserved when a
// key is absent. Validates the result.
TrainConfig train_config_from(const KeyValueConfig& cfg);

// Synthetic-series settings: `gen_regimes` holds semicolon-separated
// segments `kind:drift:noise_sigma:reversion_strength:length` with kind
// in {momentum, reversion}.
struct GenerateConfig {
  std::vector<RegimeSpec> regimes;
  double p0 = 100.0;
  std::uint64_t seed = 1;
};

GenerateConfig generate_config_from(const KeyValueConfig& cfg);

std::vector<RegimeSpec> parse_regime_specs(const std::string& text);

// Annualization for backtests (bars per year).
double periods_per_year_from(const KeyValueConfig& cfg);

}  // namespace mixtrade
