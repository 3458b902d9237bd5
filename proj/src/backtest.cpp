#include "mixtrade/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mixtrade/errors.hpp"
#include "mixtrade/ppo.hpp"

namespace mixtrade {
namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n-1); a single observation has none.
double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

PerformanceMetrics compute_metrics(const std::vector<double>& profits,
                                   const std::vector<double>& equity,
                                   double periods_per_year) {
  if (profits.empty()) throw ShapeError("metrics: profit series is empty");
  if (equity.size() != profits.size() + 1)
    throw ShapeError(
        "metrics: equity curve must hold one more point than the profits");
  if (!(periods_per_year > 0.0))
    throw ConfigError("metrics: periods_per_year must be positive");
  for (double e : equity)
    if (!(e > 0.0)) throw DataError("metrics: equity must stay positive");

  const auto t_count = static_cast<double>(profits.size());
  const double m = mean_of(profits);
  const double sd = sample_std(profits, m);

  PerformanceMetrics x;
  x.arr = (equity.back() / equity.front() - 1.0) * (periods_per_year / t_count);
  x.vo = sd;
  if (sd > 0.0) {
    x.asr = std::sqrt(periods_per_year) * m / sd;
  } else {
    x.asr = 0.0;
    x.flags.asr_degenerate = true;
  }

  double peak = equity.front();
  double mdd = 0.0;
  for (double e : equity) {
    peak = std::max(peak, e);
    mdd = std::max(mdd, (peak - e) / peak);
  }
  x.mdd = mdd;
  x.cr = x.arr / std::max(x.mdd, 1e-9);

  std::vector<double> downside(profits.size());
  for (std::size_t i = 0; i < profits.size(); ++i)
    downside[i] = std::min(profits[i], 0.0);
  const double sdd = sample_std(downside, mean_of(downside));
  if (sdd > 0.0) {
    x.sor = m / sdd;
  } else {
    x.sor = 0.0;
    x.flags.sor_degenerate = true;
  }
  return x;
}

HoldPolicy::HoldPolicy(int direction) : direction_(direction) {
  if (direction != 1 && direction != -1)
    throw ConfigError("hold policy: direction must be +1 or -1");
}

std::string HoldPolicy::name() const {
  return direction_ == 1 ? "long_hold" : "short_hold";
}

DualThrustPolicy::DualThrustPolicy(const std::vector<Bar>& bars,
                                   DualThrustParams params)
    : bars_(&bars), params_(params) {
  params_.validate();
}

void DualThrustPolicy::reset(const TradingEnv& env) {
  start_ = env.start();
  series_ = dual_thrust_series(*bars_, params_, env.start(), env.end());
}

int DualThrustPolicy::act(const TradingEnv& env) {
  const std::size_t i = env.cursor() - start_;
  if (i >= series_.size())
    throw StateError("dual thrust policy: cursor past the signal series");
  return series_[i];
}

MixturePolicy::MixturePolicy(const MixtureNets& nets,
                             const FeatureBuilder& builder, double tau,
                             const std::vector<Bar>& bars)
    : nets_(&nets),
      builder_(builder),
      bars_(&bars),
      stepper_(nets, tau),
      rng_(0),
      feat_(builder.dim()),
      prev_e_(nets.actor_count, 0.0),
      prev_greedy_(nets.actor_count, 0) {
  if (builder_.dim() != nets.in_dim)
    throw ShapeError("mixture policy: feature dim does not match the nets");
  if (!(tau > 0.0)) throw ConfigError("mixture policy: tau must be positive");
}

void MixturePolicy::reset(const TradingEnv&) {
  stepper_.reset();
  std::fill(prev_e_.begin(), prev_e_.end(), 0.0);
  gate_log_.clear();
  first_ = true;
}

int MixturePolicy::act(const TradingEnv& env) {
  const std::size_t t = env.cursor();
  if (!first_) {
    // Grade the previous bar's greedy actions against the move that has
    // since realized; ties count as a down move, like the teacher.
    const int label =
        (*bars_)[t].close > (*bars_)[t - 1].close ? 1 : -1;
    for (std::size_t j = 0; j < prev_e_.size(); ++j)
      prev_e_[j] =
          static_cast<double>(label - index_to_action(prev_greedy_[j]));
  }
  builder_.build(env.observation(), feat_.data());
  const MixtureStepper::Result& res =
      stepper_.step(feat_.data(), prev_e_.data(), nullptr);
  gate_log_.insert(gate_log_.end(), res.q.begin(), res.q.end());
  prev_greedy_ = res.greedy_index;
  first_ = false;
  return sample_action_probs(res.combined, ActionMode::kEval, rng_).action;
}

BacktestReport run_policy(Policy& policy, const std::vector<Bar>& bars,
                          const IndicatorSeries& indicators,
                          const EnvConfig& cfg, std::size_t start,
                          std::size_t end, double periods_per_year) {
  TradingEnv env(bars, indicators, cfg, start, end);
  policy.reset(env);

  BacktestReport rep;
  rep.policy_name = policy.name();
  rep.equity_curve.push_back(cfg.initial_capital);
  int prev_pos = 0;
  while (!env.done()) {
    const std::size_t t = env.cursor();
    const int action = policy.act(env);
    const Transition tr = env.step(action);
    rep.bars.push_back(t);
    rep.actions.push_back(action);
    rep.positions.push_back(tr.position);
    rep.profits.push_back(tr.profit);
    rep.equity_curve.push_back(tr.equity);
    if (tr.position != prev_pos) ++rep.trade_count;
    prev_pos = tr.position;
  }
  rep.termination_reason = termination_name(env.termination());
  rep.metrics = compute_metrics(rep.profits, rep.equity_curve,
                                periods_per_year);
  return rep;
}

std::vector<BacktestReport> baseline_suite(
    const std::vector<Policy*>& policies, const std::vector<Bar>& bars,
    const IndicatorSeries& indicators, const EnvConfig& cfg,
    std::size_t start, std::size_t end, double periods_per_year) {
  std::vector<BacktestReport> reports;
  reports.reserve(policies.size());
  for (Policy* p : policies) {
    if (p == nullptr) throw StateError("baseline suite: null policy");
    reports.push_back(
        run_policy(*p, bars, indicators, cfg, start, end, periods_per_year));
  }
  return reports;
}

nlohmann::json report_json(const BacktestReport& report) {
  return nlohmann::json{
      {"policy", report.policy_name},
      {"samples", report.profits.size()},
      {"trade_count", report.trade_count},
      {"termination", report.termination_reason},
      {"final_equity",
       report.equity_curve.empty() ? 0.0 : report.equity_curve.back()},
      {"metrics",
       {{"arr", report.metrics.arr},
        {"vo", report.metrics.vo},
        {"asr", report.metrics.asr},
        {"mdd", report.metrics.mdd},
        {"cr", report.metrics.cr},
        {"sor", report.metrics.sor},
        {"asr_degenerate", report.metrics.flags.asr_degenerate},
        {"sor_degenerate", report.metrics.flags.sor_degenerate}}}};
}

void write_equity_csv(const BacktestReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "step,bar,equity\n";
  for (std::size_t i = 0; i < report.equity_curve.size(); ++i) {
    // step 0 is the starting capital, stamped with the first acted bar
    const std::size_t bar = i == 0 ? (report.bars.empty() ? 0
                                                          : report.bars.front())
                                   : report.bars[i - 1];
    std::string line = std::to_string(i) + "," + std::to_string(bar) + ",";
    append_double(line, report.equity_curve[i]);
    out << line << "\n";
  }
  if (!out) throw DataError("failed while writing: " + path);
}

void write_actions_csv(const BacktestReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "bar,action,position,profit,equity\n";
  for (std::size_t i = 0; i < report.actions.size(); ++i) {
    std::string line = std::to_string(report.bars[i]) + "," +
                       std::to_string(report.actions[i]) + "," +
                       std::to_string(report.positions[i]) + ",";
    append_double(line, report.profits[i]);
    line += ",";
    append_double(line, report.equity_curve[i + 1]);
    out << line << "\n";
  }
  if (!out) throw DataError("failed while writing: " + path);
}

}  // namespace mixtrade
