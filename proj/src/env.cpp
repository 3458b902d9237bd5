#include "mixtrade/env.hpp"

#include <cmath>

namespace mixtrade {

void EnvConfig::validate() const {
  if (fee_rate < 0.0) throw ConfigError("env: fee_rate must be >= 0");
  if (slippage < 0.0) throw ConfigError("env: slippage must be >= 0");
  if (!(margin_threshold > 0.0 && margin_threshold < 1.0))
    throw ConfigError("env: margin_threshold must be in (0,1)");
  if (!(initial_capital > 0.0))
    throw ConfigError("env: initial_capital must be > 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0))
    throw ConfigError("env: ema_decay must be in (0,1)");
  if (!(dsr_eps > 0.0)) throw ConfigError("env: dsr_eps must be > 0");
}

DsrResult compute_dsr(const DsrState& s, double profit, const EnvConfig& cfg) {
  const double da = profit - s.a;
  const double db = profit * profit - s.b;
  const double denom = s.b - s.a * s.a;
  DsrResult out;
  out.reward = denom <= cfg.dsr_eps
                   ? 0.0
                   : (s.b * da - 0.5 * s.a * db) / std::pow(denom, 1.5);
  out.next.a = s.a + cfg.ema_decay * da;
  out.next.b = s.b + cfg.ema_decay * db;
  return out;
}

ApplyResult apply_action(int position, int action) {
  if (position < -1 || position > 1)
    throw StateError("apply_action: position outside {-1,0,1}");
  if (action != -1 && action != 1)
    throw StateError("apply_action: action outside {-1,1}");
  return ApplyResult{action, action - position};
}

double compute_profit(double p_prev, double p_now, int held_position,
                      int delta_po, const EnvConfig& cfg) {
  if (!(p_prev > 0.0 && p_now > 0.0))
    throw DataError("compute_profit: prices must be positive");
  return (p_now - p_prev - 2.0 * cfg.slippage) * held_position -
         cfg.fee_rate * p_now * std::abs(delta_po);
}

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::kNone:
      return "None";
    case Termination::kSeriesEnd:
      return "SeriesEnd";
    case Termination::kMarginBreach:
      return "MarginBreach";
  }
  return "None";
}

TradingEnv::TradingEnv(const std::vector<Bar>& bars,
                       const IndicatorSeries& indicators, const EnvConfig& cfg,
                       std::size_t start, std::size_t end)
    : bars_(bars), indicators_(indicators), cfg_(cfg), start_(start),
      end_(end) {
  cfg_.validate();
  if (indicators_.bar_count != bars_.size())
    throw StateError("env: indicator series does not cover the bars");
  if (end_ > bars_.size() || start_ >= end_)
    throw StateError("env: empty or out-of-range window");
  if (start_ < 1)
    throw StateError("env: start must leave one bar of price history");
  if (start_ < indicators_.first_valid)
    throw StateError("env: start precedes indicator warm-up (first valid " +
                     std::to_string(indicators_.first_valid) + ")");
  reset();
}

void TradingEnv::reset() {
  cursor_ = start_;
  position_ = 0;
  equity_ = cfg_.initial_capital;
  dsr_ = DsrState{};
  done_ = false;
  termination_ = Termination::kNone;
  build_observation(cursor_);
}

void TradingEnv::build_observation(std::size_t t) {
  const Bar& b = bars_[t];
  obs_.market.price_block = {b.open, b.high, b.low,
                             b.close, b.volume, b.value};
  const std::size_t k = indicators_.names.size();
  obs_.market.indicators.resize(k);
  for (std::size_t slot = 0; slot < k; ++slot)
    obs_.market.indicators[slot] = indicators_.at(t, slot);
  obs_.account.position = position_;
  obs_.account.cash = equity_;
  obs_.account.margin_ratio =
      equity_ / (cfg_.margin_threshold * cfg_.initial_capital);
  obs_.account.cumulative_return = equity_ / cfg_.initial_capital - 1.0;
}

Transition TradingEnv::step(int action) {
  if (done_) throw StateError("env: step on a finished episode");

  const ApplyResult ap = apply_action(position_, action);
  const double profit = compute_profit(bars_[cursor_ - 1].close,
                                       bars_[cursor_].close, position_,
                                       ap.delta_po, cfg_);
  const DsrResult dsr = compute_dsr(dsr_, profit, cfg_);
  dsr_ = dsr.next;
  equity_ += profit;
  position_ = ap.new_position;

  Transition tr;
  tr.t = cursor_;
  tr.action = action;
  tr.position = position_;
  tr.profit = profit;
  tr.reward = dsr.reward;
  tr.equity = equity_;

  if (equity_ < cfg_.margin_threshold * cfg_.initial_capital) {
    done_ = true;
    termination_ = Termination::kMarginBreach;
  } else if (cursor_ + 1 >= end_) {
    done_ = true;
    termination_ = Termination::kSeriesEnd;
  }

  if (!done_) {
    ++cursor_;
    build_observation(cursor_);
  } else {
    build_observation(cursor_);  // refresh account block for inspection
  }
  tr.done = done_;
  return tr;
}

std::size_t feature_dim(std::size_t indicator_count) {
  return 6 + indicator_count + 4;
}

void state_features(const Observation& obs, const EnvConfig& cfg,
                    double* out) {
  std::size_t j = 0;
  for (double v : obs.market.price_block) out[j++] = v;
  for (double v : obs.market.indicators) out[j++] = v;
  out[j++] = static_cast<double>(obs.account.position);
  out[j++] = obs.account.cash / cfg.initial_capital - 1.0;
  out[j++] = obs.account.margin_ratio - 1.0;
  out[j++] = obs.account.cumulative_return;
}

void FeatureBuilder::build(const Observation& obs, double* out) const {
  std::vector<double> raw(dim());
  state_features(obs, cfg, raw.data());
  scaler.apply(raw.data(), out);
  for (std::size_t j = market_dim(); j < dim(); ++j) out[j] = raw[j];
}

FeatureScaler fit_market_scaler(const std::vector<Bar>& bars,
                                const IndicatorSeries& indicators,
                                std::size_t start, std::size_t end) {
  if (start >= end || end > bars.size())
    throw StateError("fit_market_scaler: bad window");
  const std::size_t k = indicators.names.size();
  const std::size_t dim = 6 + k;
  std::vector<double> rows;
  rows.reserve((end - start) * dim);
  for (std::size_t t = start; t < end; ++t) {
    const Bar& b = bars[t];
    rows.insert(rows.end(),
                {b.open, b.high, b.low, b.close, b.volume, b.value});
    for (std::size_t slot = 0; slot < k; ++slot)
      rows.push_back(indicators.at(t, slot));
  }
  return FeatureScaler::fit(rows, dim);
}

}  // namespace mixtrade
