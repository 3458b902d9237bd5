#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixtrade/data.hpp"
#include "mixtrade/env.hpp"
#include "mixtrade/expert.hpp"
#include "mixtrade/mixture.hpp"
#include "mixtrade/rng.hpp"

namespace mixtrade {

// Degenerate-series markers: a ratio whose denominator vanished is
// reported as 0 with its flag set rather than as an infinity.
struct MetricFlags {
  bool asr_degenerate = false;  // zero-variance profits
  bool sor_degenerate = false;  // no downside in the profit series
};

struct PerformanceMetrics {
  double arr = 0.0;  // annualized rate of return
  double vo = 0.0;   // volatility: sample std of per-step profits
  double asr = 0.0;  // annualized Sharpe ratio
  double mdd = 0.0;  // maximum drawdown, fraction of the running peak
  double cr = 0.0;   // Calmar: ARR / max(MDD, 1e-9)
  double sor = 0.0;  // Sortino: mean profit / std of the negative part
  MetricFlags flags;
};

// Pure function of the stored series; recomputing from a report's series
// reproduces its metrics exactly. equity must hold one more point than
// profits (the leading entry is the starting capital).
PerformanceMetrics compute_metrics(const std::vector<double>& profits,
                                   const std::vector<double>& equity,
                                   double periods_per_year);

// A policy queried once per bar at the pre-step state. reset() is called
// with the bound env before the first act() of every run.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const TradingEnv& env) = 0;
  virtual int act(const TradingEnv& env) = 0;  // returns +1 or -1
  virtual std::string name() const = 0;
};

class HoldPolicy : public Policy {
 public:
  explicit HoldPolicy(int direction);
  void reset(const TradingEnv&) override {}
  int act(const TradingEnv&) override { return direction_; }
  std::string name() const override;

 private:
  int direction_;
};

class DualThrustPolicy : public Policy {
 public:
  DualThrustPolicy(const std::vector<Bar>& bars, DualThrustParams params);
  void reset(const TradingEnv& env) override;
  int act(const TradingEnv& env) override;
  std::string name() const override { return "dual_thrust"; }

 private:
  const std::vector<Bar>* bars_;
  DualThrustParams params_;
  std::vector<int> series_;
  std::size_t start_ = 0;
};

// Greedy evaluation of a trained mixture: zero gate noise, argmax of the
// combined distribution, and the gate's lagged error stream rebuilt from
// realized closes (e_{t-1} grades the previous bar's greedy actions
// against the move that has since been observed).
class MixturePolicy : public Policy {
 public:
  MixturePolicy(const MixtureNets& nets, const FeatureBuilder& builder,
                double tau, const std::vector<Bar>& bars);
  void reset(const TradingEnv& env) override;
  int act(const TradingEnv& env) override;
  std::string name() const override { return "mixture"; }

  // Gate weights recorded during the last run, one row of k per step.
  const std::vector<double>& gate_log() const { return gate_log_; }

 private:
  const MixtureNets* nets_;
  FeatureBuilder builder_;
  const std::vector<Bar>* bars_;
  MixtureStepper stepper_;
  Rng rng_;  // never drawn from at eval; satisfies the sampler interface
  std::vector<double> feat_;
  std::vector<double> prev_e_;
  std::vector<int> prev_greedy_;
  std::vector<double> gate_log_;
  bool first_ = true;
};

struct BacktestReport {
  std::string policy_name;
  std::vector<std::size_t> bars;      // bar index per step
  std::vector<int> actions;           // +1 / -1 per step
  std::vector<int> positions;         // position after each step
  std::vector<double> profits;        // per-step profit, currency
  std::vector<double> equity_curve;   // starting capital, then per step
  PerformanceMetrics metrics;
  std::size_t trade_count = 0;        // steps whose position changed
  std::string termination_reason;
};

BacktestReport run_policy(Policy& policy, const std::vector<Bar>& bars,
                          const IndicatorSeries& indicators,
                          const EnvConfig& cfg, std::size_t start,
                          std::size_t end,
                          double periods_per_year = 60480.0);

// One report per policy, all under the identical env window.
std::vector<BacktestReport> baseline_suite(
    const std::vector<Policy*>& policies, const std::vector<Bar>& bars,
    const IndicatorSeries& indicators, const EnvConfig& cfg,
    std::size_t start, std::size_t end, double periods_per_year = 60480.0);

// Metrics and run facts; the per-bar series go to CSV instead.
nlohmann::json report_json(const BacktestReport& report);

void write_equity_csv(const BacktestReport& report, const std::string& path);
void write_actions_csv(const BacktestReport& report, const std::string& path);

}  // namespace mixtrade
