#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixtrade/data.hpp"
#include "mixtrade/env.hpp"
#include "mixtrade/expert.hpp"
#include "mixtrade/mixture.hpp"
#include "mixtrade/ppo.hpp"
#include "mixtrade/rng.hpp"

namespace mixtrade {

// Everything one training run needs. The sub-configs keep their own
// defaults; validate() checks the trainer-level fields and delegates.
struct TrainConfig {
  std::uint64_t seed = 1;
  bool pretrain = true;              // imitation warm start for the actors
  std::size_t pretrain_epochs = 30;
  std::size_t imitation_epochs = 100;
  std::size_t ppo_rounds = 100;
  double pretrain_lr = 1e-3;
  double train_split = 0.8;          // leading fraction of tradable bars
  std::size_t hidden_dim = 16;
  std::size_t rep_dim = 16;
  std::size_t alloc_hidden = 16;
  EnvConfig env;
  PpoConfig ppo;
  MixtureConfig mixture;
  DualThrustParams expert;

  void validate() const;
};

// Bar-index boundaries of one run. warm_up is the first tradable bar
// (indicator warm-up, expert lookback, one bar of price history);
// training covers [warm_up, train_end), evaluation [train_end,
// series_end).
struct SplitIndices {
  std::size_t warm_up = 0;
  std::size_t train_end = 0;
  std::size_t series_end = 0;

  std::size_t train_steps() const { return train_end - warm_up; }
  std::size_t test_steps() const { return series_end - train_end; }
};

SplitIndices compute_split(const std::vector<Bar>& bars,
                           const IndicatorSeries& indicators,
                           const DualThrustParams& expert,
                           double train_split);

// Rolls the expert actions through the env once, recording scaled
// features, action indexes and differential-Sharpe rewards. The buffer
// is filled exactly once and never mutated afterwards.
DemonstrationBuffer fill_demo_buffer(TradingEnv& env,
                                     const FeatureBuilder& builder,
                                     const std::vector<int>& expert_actions);

// Windowed cross-entropy of every actor head against the recorded
// actions, minibatch SGD on the actor parameters only: the graph never
// touches the critic or the gate, so their entries stay bit-identical.
// Returns the per-epoch mean cross-entropy.
std::vector<double> pretrain_actors(ParamStore& store,
                                    std::vector<PolicyNet>& actors,
                                    const std::vector<double>& features,
                                    const std::vector<int>& action_index,
                                    std::size_t in_dim, const PpoConfig& cfg,
                                    double lr, std::size_t epochs,
                                    Rng& shuffle_rng);

struct MixtureTrainResult {
  MixtureNets nets;
  FeatureBuilder builder;
  SplitIndices split;
  std::vector<std::string> log;  // one JSON object per line, emit order
  DemonstrationBuffer demo;
  std::vector<double> final_gate;            // last rollout's q, rows x k
  std::vector<std::size_t> final_gate_bars;  // bar index per row
};

// The full pipeline: pretrain -> demonstration buffer -> imitation
// epochs -> on-policy rounds. Each log line carries a "phase" tag in
// that order; numeric failures rethrow with the phase prefixed.
MixtureTrainResult train_mixture(const TrainConfig& cfg,
                                 const std::vector<Bar>& bars);

struct PlainTrainResult {
  ActorCritic nets;
  FeatureBuilder builder;
  SplitIndices split;
  std::vector<std::string> log;
  DemonstrationBuffer demo;
};

// Single-actor baseline sharing every phase, stream role and log schema
// with train_mixture. With one actor, zero alignment weight and the
// similarity penalty off, train_mixture walks the same trajectories and
// emits byte-identical diagnostics.
PlainTrainResult train_plain(const TrainConfig& cfg,
                             const std::vector<Bar>& bars);

// Self-contained checkpoint: parameters, feature scaler, env costs,
// expert settings and the split, enough to rebuild the policy for a
// backtest without the training config.
nlohmann::json mixture_checkpoint(const MixtureNets& nets,
                                  const FeatureBuilder& builder,
                                  const TrainConfig& cfg,
                                  const SplitIndices& split);

struct LoadedMixture {
  MixtureNets nets;
  FeatureBuilder builder;  // builder.cfg is the env config
  SplitIndices split;
  double tau = 1.0;
  DualThrustParams expert;
};

LoadedMixture load_mixture_checkpoint(const nlohmann::json& j);

}  // namespace mixtrade
