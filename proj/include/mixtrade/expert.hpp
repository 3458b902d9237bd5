#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mixtrade/data.hpp"

namespace mixtrade {

struct DualThrustParams {
  std::size_t lookback = 20;  // N
  double k1 = 0.5;            // buy-line multiplier
  double k2 = 0.5;            // sell-line multiplier

  void validate() const;
};

// Range breakout on the current bar: Range = max(HH - LC, HC - LL) over
// the `lookback` bars preceding the last window element; buy line =
// open + k1 Range, sell line = open - k2 Range, evaluated on the last
// bar's open/close. Between the lines the previous signal persists.
// The window must hold at least lookback + 1 bars.
int dual_thrust_signal(std::span<const Bar> window,
                       const DualThrustParams& params, int prev_signal);

// Signal per bar index in [start, end); start must be >= lookback. The
// signal chain starts from initial_signal (long, matching the action
// space's lack of a flat state).
std::vector<int> dual_thrust_series(const std::vector<Bar>& bars,
                                    const DualThrustParams& params,
                                    std::size_t start, std::size_t end,
                                    int initial_signal = 1);

// Posterior labels: element t is +1 when closes[t+1] > closes[t] and -1
// otherwise (ties are -1). Output length = input length - 1. Future
// information by construction; consumers must lag it.
std::vector<int> teacher_actions(const std::vector<double>& closes);

}  // namespace mixtrade
