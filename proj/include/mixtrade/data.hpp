#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixtrade/errors.hpp"

namespace mixtrade {

struct Bar {
  std::int64_t timestamp = 0;  // epoch seconds, strictly increasing
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;
  double value = 0.0;
};

// CSV schema: header `timestamp,open,high,low,close,volume,value`, one bar
// per row. Rows must be valid (low <= min(open, close) <= max(open, close)
// <= high, positive prices, nonnegative volume/value) and timestamps
// strictly increasing; violations raise DataError naming the line.
std::vector<Bar> load_bars(const std::string& path);
void save_bars_csv(const std::string& path, const std::vector<Bar>& bars);

// Per-bar indicator values with explicit warm-up tracking. values/valid are
// bars x names row-major; entries before an indicator's warm-up are NaN and
// flagged invalid.
struct IndicatorSeries {
  std::vector<std::string> names;
  std::size_t bar_count = 0;
  std::size_t first_valid = 0;  // first index where all indicators are valid
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  double at(std::size_t bar, std::size_t slot) const {
    return values[bar * names.size() + slot];
  }
  bool is_valid(std::size_t bar, std::size_t slot) const {
    return valid[bar * names.size() + slot] != 0;
  }
};

// Known names: rsi14, macd_hist, boll_pb, mom10, atr14. Unknown names raise
// ConfigError.
IndicatorSeries compute_indicators(const std::vector<Bar>& bars,
                                   const std::vector<std::string>& names);
const std::vector<std::string>& default_indicators();

enum class Regime { kMomentum, kMeanReversion };

struct RegimeSpec {
  Regime regime = Regime::kMomentum;
  double drift = 0.0;               // per-bar expected return (momentum)
  double noise_sigma = 0.0;         // per-bar return noise
  double reversion_strength = 0.0;  // in [0, 1] (mean reversion)
  std::size_t length = 0;           // bars
};

// Concatenated regime segments. Momentum: p' = p (1 + drift + sigma z).
// Mean reversion: log-price pulled toward the segment's starting log-price
// by `reversion_strength` per bar, plus sigma z. High/low wicks are small
// seeded uniforms around max/min(open, close). Reproducible from seed.
std::vector<Bar> generate_synthetic(const std::vector<RegimeSpec>& specs,
                                    std::uint64_t seed, double p0);

// Per-dimension standardization fit on training rows; degenerate (zero
// variance) dimensions pass through unscaled.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> stdev;

  static FeatureScaler fit(const std::vector<double>& rows, std::size_t dim);
  void apply(const double* in, double* out) const;
  std::size_t dim() const { return mean.size(); }

  nlohmann::json to_json() const;
  static FeatureScaler from_json(const nlohmann::json& j);
};

}  // namespace mixtrade
