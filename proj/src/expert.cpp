#include "mixtrade/expert.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "mixtrade/errors.hpp"

namespace mixtrade {

void DualThrustParams::validate() const {
  if (lookback < 1) throw ConfigError("dual thrust lookback must be >= 1");
  if (k1 <= 0.0 || k2 <= 0.0)
    throw ConfigError("dual thrust multipliers must be positive");
}

int dual_thrust_signal(std::span<const Bar> window,
                       const DualThrustParams& params, int prev_signal) {
  params.validate();
  const std::size_t n = params.lookback;
  if (window.size() < n + 1) {
    throw DataError("dual thrust window holds " +
                    std::to_string(window.size()) + " bars, needs at least " +
                    std::to_string(n + 1));
  }
  if (prev_signal != 1 && prev_signal != -1)
    throw ConfigError("dual thrust prev_signal must be +1 or -1");

  // Lookback covers the n bars immediately before the last element; the
  // last element is the bar being classified.
  const std::size_t cur = window.size() - 1;
  double hh = window[cur - n].high;
  double lc = window[cur - n].close;
  double hc = window[cur - n].close;
  double ll = window[cur - n].low;
  for (std::size_t i = cur - n + 1; i < cur; ++i) {
    hh = std::max(hh, window[i].high);
    lc = std::min(lc, window[i].close);
    hc = std::max(hc, window[i].close);
    ll = std::min(ll, window[i].low);
  }
  const double range = std::max(hh - lc, hc - ll);
  const double buy_line = window[cur].open + params.k1 * range;
  const double sell_line = window[cur].open - params.k2 * range;
  if (window[cur].close > buy_line) return 1;
  if (window[cur].close < sell_line) return -1;
  return prev_signal;
}

std::vector<int> dual_thrust_series(const std::vector<Bar>& bars,
                                    const DualThrustParams& params,
                                    std::size_t start, std::size_t end,
                                    int initial_signal) {
  params.validate();
  if (start < params.lookback) {
    throw StateError("dual thrust series start " + std::to_string(start) +
                     " is inside the lookback warm-up of " +
                     std::to_string(params.lookback));
  }
  if (end > bars.size() || start > end)
    throw StateError("dual thrust series range is out of bounds");

  std::vector<int> out;
  out.reserve(end - start);
  int prev = initial_signal;
  for (std::size_t t = start; t < end; ++t) {
    std::span<const Bar> window(bars.data() + (t - params.lookback),
                                params.lookback + 1);
    prev = dual_thrust_signal(window, params, prev);
    out.push_back(prev);
  }
  return out;
}

std::vector<int> teacher_actions(const std::vector<double>& closes) {
  if (closes.size() < 2)
    throw DataError("teacher labels need at least two closes");
  std::vector<int> out(closes.size() - 1);
  for (std::size_t t = 0; t + 1 < closes.size(); ++t)
    out[t] = closes[t + 1] > closes[t] ? 1 : -1;
  return out;
}

}  // namespace mixtrade
