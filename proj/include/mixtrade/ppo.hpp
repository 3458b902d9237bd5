#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mixtrade/nn.hpp"
#include "mixtrade/rng.hpp"

namespace mixtrade {

struct PpoConfig {
  double gamma = 0.99;
  double lambda_gae = 0.95;
  double eps_clip = 0.2;
  double lr = 3e-4;
  double momentum = 0.0;
  std::size_t epochs = 4;        // K update passes per collected batch
  std::size_t batch = 1024;      // samples per minibatch
  std::size_t bptt_window = 32;  // gradient truncation length
  double value_coeff = 1.0;      // weight of the value loss in the step

  std::size_t windows_per_minibatch() const { return batch / bptt_window; }
  void validate() const;
};

// GRU encoder feeding a two-layer head. The policy head's first layer
// output (after tanh) is the representation used by the disentangled
// penalty; the second layer emits two logits for actions +1 / -1.
struct PolicyNet {
  GruParams enc;
  LinearParams l1;  // hidden -> rep, tanh
  LinearParams l2;  // rep -> 2 logits
};

struct ValueNet {
  GruParams enc;
  LinearParams l1;  // hidden -> rep, tanh
  LinearParams l2;  // rep -> scalar V
};

PolicyNet make_policy_net(ParamStore& store, const std::string& prefix,
                          std::size_t in_dim, std::size_t hidden_dim,
                          std::size_t rep_dim);
ValueNet make_value_net(ParamStore& store, const std::string& prefix,
                        std::size_t in_dim, std::size_t hidden_dim,
                        std::size_t rep_dim);

// One actor plus one critic, each with its own encoder, in a single
// parameter store (actor entries first). Initialize with
// store.init_uniform on the kInit substream.
struct ActorCritic {
  ParamStore store;
  PolicyNet actor;
  ValueNet critic;
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t rep_dim = 0;

  static ActorCritic create(std::size_t in_dim, std::size_t hidden_dim,
                            std::size_t rep_dim);
};

// Logit slot 0 is action +1, slot 1 is action -1 (argmax ties resolve to
// slot 0, i.e. +1).
int index_to_action(int index);
int action_to_index(int action);

// Sequential GRU encoding of a feature sequence from a zero initial
// hidden state; returns t_count x hidden_dim (hidden after each step).
std::vector<double> encode(const ParamStore& store, const GruParams& gru,
                           const std::vector<double>& features,
                           std::size_t t_count, std::size_t in_dim);

enum class ActionMode { kTrain, kEval };

struct ActionSample {
  int action = 1;
  int index = 0;
  double log_prob = 0.0;
};

void softmax2(const double logits[2], double probs[2]);

// Train mode draws from the categorical softmax(logits); eval takes the
// argmax. log_prob is always the log-probability of the chosen action.
ActionSample sample_action(const double logits[2], ActionMode mode, Rng& rng);
ActionSample sample_action_probs(const double probs[2], ActionMode mode,
                                 Rng& rng);

// Backward recursion A_t = delta_t + gamma*lambda*A_{t+1} with
// delta_t = r_t + gamma*V_{t+1} - V_t. values must hold one trailing
// bootstrap entry (0 at a terminal).
std::vector<double> compute_gae(const std::vector<double>& rewards,
                                const std::vector<double>& values,
                                double gamma, double lambda);

// Discounted reward suffix sums with terminal bootstrap zero.
std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma);

// In-place zero-mean unit-std (population); degenerate batches are only
// centered.
void normalize_advantages(std::vector<double>& adv);

// Mean over the batch of min(ratio*A, clip(ratio, 1-eps, 1+eps)*A) with
// ratio = exp(new - old); the objective PPO ascends.
double clip_objective(const std::vector<double>& log_probs_new,
                      const std::vector<double>& log_probs_old,
                      const std::vector<double>& advantages, double eps_clip);

double value_mse(const std::vector<double>& values_pred,
                 const std::vector<double>& returns);

// One trajectory's training view. Rollout collection fills features,
// action_index and rewards; refresh_caches freezes everything the update
// reads (values, old log-probs, window-start hiddens, advantages,
// returns) under the current parameters.
struct RolloutBuffer {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t window = 0;  // bptt_window used for the h0 snapshots

  std::vector<double> features;  // T x in_dim
  std::vector<int> action_index;
  std::vector<double> rewards;

  std::vector<double> old_log_probs;
  std::vector<double> values;      // T entries (bootstrap appended in GAE)
  std::vector<double> advantages;  // normalized
  std::vector<double> returns;
  std::vector<double> actor_h0;   // full_windows x hidden_dim
  std::vector<double> critic_h0;  // full_windows x hidden_dim

  std::size_t size() const { return action_index.size(); }
  std::size_t full_windows() const { return window ? size() / window : 0; }
};

// Expert-generated trajectory; actions come from the expert policy, never
// the actor. Filled only by the trainer's demo pass and immutable after.
struct DemonstrationBuffer {
  RolloutBuffer data;
};

// No-grad pass under the current parameters refreshing every cached
// quantity the update consumes.
void refresh_caches(RolloutBuffer& buffer, const ActorCritic& nets,
                    const PpoConfig& cfg);

struct UpdateStats {
  double clip_loss = 0.0;   // minibatch-mean clip objective
  double value_loss = 0.0;  // minibatch-mean value MSE
  std::size_t minibatches = 0;
};

// `epochs` shuffled passes of clipped-surrogate ascent plus value-loss
// descent over full windows of the buffer; caches must be frozen by the
// caller beforehand. Throws NumericError on a non-finite loss.
UpdateStats ppo_update(const RolloutBuffer& buffer, ActorCritic& nets,
                       const PpoConfig& cfg, Rng& shuffle_rng,
                       std::size_t epochs);

// Fisher-Yates over [0, n) on the given stream; shared by every trainer
// so identical configurations shuffle identically.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace mixtrade
