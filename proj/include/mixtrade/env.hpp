#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mixtrade/data.hpp"
#include "mixtrade/errors.hpp"

namespace mixtrade {

struct EnvConfig {
  double fee_rate = 2.3e-5;       // per-unit-notional transaction fee
  double slippage = 0.2;          // currency per executed side (enters as 2s)
  double margin_threshold = 0.7;  // equity floor as a fraction of capital
  double initial_capital = 50000.0;
  double ema_decay = 0.01;  // eta for the DSR moment EMAs
  double dsr_eps = 1e-8;    // denominator guard

  void validate() const;
};

struct DsrState {
  double a = 0.0;  // EMA first moment of profit
  double b = 0.0;  // EMA second moment of profit
};

struct DsrResult {
  double reward = 0.0;
  DsrState next;
};

// One DSR evaluation plus the moment update. The reward is zero whenever
// the variance proxy B - A^2 falls at or below cfg.dsr_eps (cold start,
// degenerate history); the state still advances.
DsrResult compute_dsr(const DsrState& s, double profit, const EnvConfig& cfg);

struct ApplyResult {
  int new_position = 0;
  int delta_po = 0;
};

// Position transition table: the new position is the action itself and
// delta_po is the signed contract change (covers all six table rows).
ApplyResult apply_action(int position, int action);

// profit = (p_now - p_prev - 2*slippage) * held_position
//          - fee_rate * p_now * |delta_po|
// held_position is the position over (prev, now], i.e. the previous
// action; 0 covers the flat start.
double compute_profit(double p_prev, double p_now, int held_position,
                      int delta_po, const EnvConfig& cfg);

struct MarketState {
  std::array<double, 6> price_block{};  // open, high, low, close, vol, value
  std::vector<double> indicators;
};

struct AccountState {
  int position = 0;
  double cash = 0.0;          // equity: capital plus accumulated profit
  double margin_ratio = 0.0;  // cash / (margin_threshold * capital)
  double cumulative_return = 0.0;
};

struct Observation {
  MarketState market;
  AccountState account;
};

enum class Termination { kNone, kSeriesEnd, kMarginBreach };

std::string termination_name(Termination t);

struct Transition {
  std::size_t t = 0;  // bar index acted on
  int action = 0;
  int position = 0;  // position after the action
  double profit = 0.0;
  double reward = 0.0;
  double equity = 0.0;
  bool done = false;
};

// MDP over a bar window [start, end). Acting at bar t realizes the profit
// of the position held over (t-1, t] plus the fee for the position change
// made at t, feeds it through the DSR, and advances the cursor. Market
// features never depend on actions; account features do.
class TradingEnv {
 public:
  TradingEnv(const std::vector<Bar>& bars, const IndicatorSeries& indicators,
             const EnvConfig& cfg, std::size_t start, std::size_t end);

  void reset();
  bool done() const { return done_; }
  Termination termination() const { return termination_; }
  const Observation& observation() const { return obs_; }
  std::size_t cursor() const { return cursor_; }
  double equity() const { return equity_; }
  std::size_t start() const { return start_; }
  std::size_t end() const { return end_; }
  std::size_t max_steps() const { return end_ - start_; }

  Transition step(int action);

 private:
  void build_observation(std::size_t t);

  const std::vector<Bar>& bars_;
  const IndicatorSeries& indicators_;
  EnvConfig cfg_;
  std::size_t start_ = 0;
  std::size_t end_ = 0;

  std::size_t cursor_ = 0;
  int position_ = 0;
  double equity_ = 0.0;
  DsrState dsr_;
  bool done_ = false;
  Termination termination_ = Termination::kNone;
  Observation obs_;
};

// Raw state vector: 6 price-block entries, the indicator slots, then
// [position, cash/capital - 1, margin_ratio - 1, cumulative_return].
std::size_t feature_dim(std::size_t indicator_count);
void state_features(const Observation& obs, const EnvConfig& cfg,
                    double* out);

// Market block standardized by the scaler (fit on the market features of
// the training window); account block passed through.
struct FeatureBuilder {
  FeatureScaler scaler;  // over the market dims only
  EnvConfig cfg;

  std::size_t market_dim() const { return scaler.dim(); }
  std::size_t dim() const { return scaler.dim() + 4; }
  void build(const Observation& obs, double* out) const;
};

// Scaler fit over the market features of bars [start, end).
FeatureScaler fit_market_scaler(const std::vector<Bar>& bars,
                                const IndicatorSeries& indicators,
                                std::size_t start, std::size_t end);

}  // namespace mixtrade
