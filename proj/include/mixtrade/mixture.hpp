#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mixtrade/nn.hpp"
#include "mixtrade/ppo.hpp"
#include "mixtrade/rng.hpp"

namespace mixtrade {

struct MixtureConfig {
  std::size_t actor_count = 2;
  double tau = 1.0;           // gate temperature, constant
  double dis_weight = 1.0;    // representation-similarity penalty weight
  double lambda_ot = 0.1;     // allocation alignment weight
  double ot_epsilon = 0.05;   // entropic regularization of the assignment
  std::size_t ot_max_iters = 500;
  double ot_tol = 1e-6;
  bool use_ot = true;
  bool use_disentangle = true;

  void validate() const;
};

// k actor heads with per-actor encoders, one shared critic, and the
// allocation gate: a GRU over market states, a GRU over lagged
// teacher-error vectors, and a fully connected layer emitting k logits.
// Store insertion order is actors, critic, gate; a k=1 instance therefore
// draws its actor and critic parameters from the same initializer stream
// prefix as a standalone ActorCritic.
struct MixtureNets {
  ParamStore store;
  std::vector<PolicyNet> actors;
  ValueNet critic;
  GruParams alloc_state;
  GruParams alloc_error;
  LinearParams alloc_fc;
  std::size_t actor_count = 0;
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t rep_dim = 0;
  std::size_t alloc_hidden = 0;

  static MixtureNets create(std::size_t actor_count, std::size_t in_dim,
                            std::size_t hidden_dim, std::size_t rep_dim,
                            std::size_t alloc_hidden);
};

// Soft allocation weights over the whole sequence: for each step the two
// gate GRUs advance on the market features and the PRE-LAGGED error row
// (row t holds e_{t-1}; row 0 is zeros), their hiddens are concatenated
// into the FC, and q_t = softmax((logits + noise) / tau). Passing an
// empty noise vector means zero noise (evaluation). Returns t_count x k.
std::vector<double> allocate(const MixtureNets& nets,
                             const std::vector<double>& features,
                             const std::vector<double>& lagged_errors,
                             const std::vector<double>& gumbel_noise,
                             std::size_t t_count, double tau);

// final[a] = sum_j q[j] * actor_probs[j*2 + a] for one sample.
void combine_actions(const double* q, const double* actor_probs,
                     std::size_t actor_count, double out[2]);

// Signed teacher errors e[i][j] = teacher[i] - actions[i][j]; both sides
// in {-1,+1}, entries in {-2,0,+2}. The transport cost is |e|.
std::vector<double> error_matrix(const std::vector<int>& teacher,
                                 const std::vector<int>& actor_actions,
                                 std::size_t actor_count);

// Sum over samples of pairwise dot products between the actors' head
// representations (N x k x d, actor-major per sample). For k=2 this is
// the plain sum of x_i1 . x_i2.
double disentangled_loss(const std::vector<double>& reps, std::size_t n,
                         std::size_t actor_count, std::size_t rep_dim);

// Combined scalar the actor step maximizes: the clipped surrogate minus
// the similarity penalty plus lambda_ot * sum(M-hat * log q).
double actor_objective(double clip_term, double dis_term,
                       double ot_alignment_term, double lambda_ot);

// Row-normalized transport targets for the gate: rows without a teacher
// label are excluded from the transport problem and come back all-zero
// (they then contribute exactly nothing to the alignment term).
std::vector<double> ot_targets(const std::vector<int>& teacher,
                               const std::vector<char>& teacher_valid,
                               const std::vector<int>& greedy_index,
                               std::size_t actor_count,
                               const MixtureConfig& cfg);

// Per-actor greedy action indexes (argmax of each actor head, ties to
// slot 0) over a feature sequence; t_count x k.
std::vector<int> mixture_greedy_actions(const MixtureNets& nets,
                                        const std::vector<double>& features,
                                        std::size_t t_count);

// Sequential evaluation of the mixture policy, one step at a time, for
// interactive rollouts. Mirrors the batched cache pass bit-for-bit.
class MixtureStepper {
 public:
  MixtureStepper(const MixtureNets& nets, double tau);

  void reset();

  struct Result {
    std::vector<double> q;            // k gate weights
    std::vector<double> actor_probs;  // k x 2
    double combined[2] = {0.0, 0.0};
    std::vector<int> greedy_index;    // k entries in {0, 1}
  };

  // lagged_error: k entries (e_{t-1}; zeros on the first step).
  // noise: k gumbel draws, or nullptr for zero noise.
  const Result& step(const double* features, const double* lagged_error,
                     const double* noise);

 private:
  const MixtureNets* nets_;
  double tau_;
  std::vector<std::vector<double>> actor_h_;
  std::vector<double> state_h_, error_h_;
  NnWork work_;
  Result out_;
};

// One mixture trajectory plus every cache its update consumes. The
// error rows, gumbel noise and transport targets are frozen when the
// rollout is collected; refresh recomputes the rest under the current
// parameters.
struct MixtureRollout {
  std::size_t in_dim = 0;
  std::size_t actor_count = 0;
  std::size_t hidden_dim = 0;
  std::size_t alloc_hidden = 0;
  std::size_t window = 0;

  std::vector<double> features;       // T x in_dim
  std::vector<int> action_index;      // T
  std::vector<double> rewards;        // T
  std::vector<double> lagged_errors;  // T x k, row t = e_{t-1}, row 0 = 0
  std::vector<double> gumbel_noise;   // T x k (empty = zero noise)
  std::vector<double> ot_targets;     // T x k (empty = no alignment term)

  std::vector<double> old_log_probs;  // of the combined distribution
  std::vector<double> values;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> q;              // T x k, gate weights at freeze time
  std::vector<double> actor_h0;       // k x windows x hidden (actor-major)
  std::vector<double> critic_h0;      // windows x hidden
  std::vector<double> alloc_state_h0; // windows x alloc_hidden
  std::vector<double> alloc_error_h0; // windows x alloc_hidden

  std::size_t size() const { return action_index.size(); }
  std::size_t full_windows() const { return window ? size() / window : 0; }
};

void mixture_refresh_caches(MixtureRollout& rollout, const MixtureNets& nets,
                            const MixtureConfig& mix_cfg,
                            const PpoConfig& ppo_cfg);

struct MixtureUpdateStats {
  double clip_loss = 0.0;
  double value_loss = 0.0;
  double dis_loss = 0.0;   // mean similarity penalty per sample
  double ot_align = 0.0;   // mean alignment term per sample
  std::size_t minibatches = 0;
};

// Shuffled minibatch passes over full windows maximizing the combined
// actor objective and descending the value loss; gradients reach the
// actors AND the gate. With one actor and both penalty terms disabled the
// taped graph degenerates to the plain policy update, parameter for
// parameter. Throws NumericError on a non-finite loss.
MixtureUpdateStats mixture_update(const MixtureRollout& rollout,
                                  MixtureNets& nets,
                                  const MixtureConfig& mix_cfg,
                                  const PpoConfig& ppo_cfg, Rng& shuffle_rng,
                                  std::size_t epochs);

}  // namespace mixtrade
