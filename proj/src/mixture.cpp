#include "mixtrade/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mixtrade/errors.hpp"
#include "mixtrade/kernels.hpp"
#include "mixtrade/ot.hpp"
#include "mixtrade/tensor.hpp"

namespace mixtrade {

void MixtureConfig::validate() const {
  if (actor_count == 0) throw ConfigError("actor_count must be at least 1");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(dis_weight >= 0.0)) throw ConfigError("dis_weight must be >= 0");
  if (!(lambda_ot >= 0.0)) throw ConfigError("lambda_ot must be >= 0");
  if (!(ot_epsilon > 0.0)) throw ConfigError("ot_epsilon must be positive");
  if (ot_max_iters == 0) throw ConfigError("ot_max_iters must be at least 1");
  if (!(ot_tol > 0.0)) throw ConfigError("ot_tol must be positive");
}

MixtureNets MixtureNets::create(std::size_t actor_count, std::size_t in_dim,
                                std::size_t hidden_dim, std::size_t rep_dim,
                                std::size_t alloc_hidden) {
  if (actor_count == 0) throw ConfigError("actor_count must be at least 1");
  if (in_dim == 0 || hidden_dim == 0 || rep_dim == 0 || alloc_hidden == 0)
    throw ConfigError("network dimensions must be positive");
  MixtureNets nets;
  nets.actor_count = actor_count;
  nets.in_dim = in_dim;
  nets.hidden_dim = hidden_dim;
  nets.rep_dim = rep_dim;
  nets.alloc_hidden = alloc_hidden;
  nets.actors.reserve(actor_count);
  for (std::size_t j = 0; j < actor_count; ++j)
    nets.actors.push_back(make_policy_net(nets.store,
                                          "actor" + std::to_string(j), in_dim,
                                          hidden_dim, rep_dim));
  nets.critic =
      make_value_net(nets.store, "critic", in_dim, hidden_dim, rep_dim);
  nets.alloc_state = make_gru(nets.store, "alloc_state", in_dim, alloc_hidden);
  nets.alloc_error =
      make_gru(nets.store, "alloc_error", actor_count, alloc_hidden);
  nets.alloc_fc = make_linear(nets.store, "alloc_fc", 2 * alloc_hidden,
                              actor_count);
  return nets;
}

namespace {

// rep = tanh(l1 h), out = l2 rep, batched over rows; bit-identical per
// row to single-row evaluation.
std::vector<double> head_forward(const ParamStore& store,
                                 const LinearParams& l1,
                                 const LinearParams& l2,
                                 const std::vector<double>& hidden,
                                 std::size_t t_count, NnWork& work) {
  std::vector<double> rep(t_count * l1.out_dim);
  linear_infer(store, l1, hidden.data(), t_count, rep.data(), work);
  kernels::vtanh(rep.data(), rep.data(), rep.size());
  std::vector<double> out(t_count * l2.out_dim);
  linear_infer(store, l2, rep.data(), t_count, out.data(), work);
  return out;
}

// Gate weights for one step: q = softmax((logits + noise) / tau).
void gate_row(const double* logits, const double* noise, std::size_t k,
              double inv_tau, double* q, std::vector<double>& scratch) {
  scratch.resize(k);
  for (std::size_t j = 0; j < k; ++j)
    scratch[j] = (logits[j] + (noise ? noise[j] : 0.0)) * inv_tau;
  kernels::softmax_row(scratch.data(), q, k);
}

}  // namespace

std::vector<double> allocate(const MixtureNets& nets,
                             const std::vector<double>& features,
                             const std::vector<double>& lagged_errors,
                             const std::vector<double>& gumbel_noise,
                             std::size_t t_count, double tau) {
  const std::size_t k = nets.actor_count;
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (features.size() != t_count * nets.in_dim)
    throw ShapeError("feature buffer does not match t_count * in_dim");
  if (lagged_errors.size() != t_count * k)
    throw ShapeError("lagged error buffer must be t_count x actor_count");
  if (!gumbel_noise.empty() && gumbel_noise.size() != t_count * k)
    throw ShapeError("noise buffer must be empty or t_count x actor_count");

  const std::vector<double> state_h =
      encode(nets.store, nets.alloc_state, features, t_count, nets.in_dim);
  const std::vector<double> error_h =
      encode(nets.store, nets.alloc_error, lagged_errors, t_count, k);

  const std::size_t ah = nets.alloc_hidden;
  std::vector<double> cat(t_count * 2 * ah);
  for (std::size_t t = 0; t < t_count; ++t) {
    std::memcpy(cat.data() + t * 2 * ah, state_h.data() + t * ah,
                ah * sizeof(double));
    std::memcpy(cat.data() + t * 2 * ah + ah, error_h.data() + t * ah,
                ah * sizeof(double));
  }
  NnWork work;
  std::vector<double> logits(t_count * k);
  linear_infer(nets.store, nets.alloc_fc, cat.data(), t_count, logits.data(),
               work);

  const double inv_tau = 1.0 / tau;
  std::vector<double> q(t_count * k);
  std::vector<double> scratch;
  for (std::size_t t = 0; t < t_count; ++t) {
    const double* noise =
        gumbel_noise.empty() ? nullptr : gumbel_noise.data() + t * k;
    gate_row(logits.data() + t * k, noise, k, inv_tau, q.data() + t * k,
             scratch);
  }
  return q;
}

void combine_actions(const double* q, const double* actor_probs,
                     std::size_t actor_count, double out[2]) {
  out[0] = 0.0;
  out[1] = 0.0;
  for (std::size_t j = 0; j < actor_count; ++j) {
    out[0] += q[j] * actor_probs[j * 2 + 0];
    out[1] += q[j] * actor_probs[j * 2 + 1];
  }
}

std::vector<double> error_matrix(const std::vector<int>& teacher,
                                 const std::vector<int>& actor_actions,
                                 std::size_t actor_count) {
  const std::size_t n = teacher.size();
  if (actor_actions.size() != n * actor_count)
    throw ShapeError("actor action matrix must be n x actor_count");
  std::vector<double> e(n * actor_count);
  for (std::size_t i = 0; i < n; ++i) {
    if (teacher[i] != 1 && teacher[i] != -1)
      throw ShapeError("teacher actions must be +1 or -1");
    for (std::size_t j = 0; j < actor_count; ++j) {
      const int a = actor_actions[i * actor_count + j];
      if (a != 1 && a != -1)
        throw ShapeError("actor actions must be +1 or -1");
      e[i * actor_count + j] = static_cast<double>(teacher[i] - a);
    }
  }
  return e;
}

double disentangled_loss(const std::vector<double>& reps, std::size_t n,
                         std::size_t actor_count, std::size_t rep_dim) {
  if (reps.size() != n * actor_count * rep_dim)
    throw ShapeError("representation buffer must be n x k x rep_dim");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = reps.data() + i * actor_count * rep_dim;
    for (std::size_t a = 0; a < actor_count; ++a)
      for (std::size_t b = a + 1; b < actor_count; ++b) {
        double dot = 0.0;
        for (std::size_t d = 0; d < rep_dim; ++d)
          dot += row[a * rep_dim + d] * row[b * rep_dim + d];
        total += dot;
      }
  }
  return total;
}

double actor_objective(double clip_term, double dis_term,
                       double ot_alignment_term, double lambda_ot) {
  return clip_term - dis_term + lambda_ot * ot_alignment_term;
}

std::vector<double> ot_targets(const std::vector<int>& teacher,
                               const std::vector<char>& teacher_valid,
                               const std::vector<int>& greedy_index,
                               std::size_t actor_count,
                               const MixtureConfig& cfg) {
  const std::size_t n = teacher.size();
  if (teacher_valid.size() != n)
    throw ShapeError("teacher validity mask must match teacher length");
  if (greedy_index.size() != n * actor_count)
    throw ShapeError("greedy index matrix must be n x actor_count");

  std::vector<double> targets(n * actor_count, 0.0);
  std::vector<std::size_t> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (teacher_valid[i]) rows.push_back(i);
  if (rows.empty()) return targets;

  std::vector<double> cost(rows.size() * actor_count);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    for (std::size_t j = 0; j < actor_count; ++j) {
      const int a = index_to_action(greedy_index[i * actor_count + j]);
      cost[r * actor_count + j] = std::abs(
          static_cast<double>(teacher[i] - a));
    }
  }

  TransportProblem problem = TransportProblem::balanced(
      rows.size(), actor_count, std::move(cost), cfg.ot_epsilon);
  problem.max_iters = cfg.ot_max_iters;
  problem.tol = cfg.ot_tol;
  const TransportPlan plan = sinkhorn_solve(problem);
  const std::vector<double> normalized = row_targets(plan);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::memcpy(targets.data() + rows[r] * actor_count,
                normalized.data() + r * actor_count,
                actor_count * sizeof(double));
  return targets;
}

std::vector<int> mixture_greedy_actions(const MixtureNets& nets,
                                        const std::vector<double>& features,
                                        std::size_t t_count) {
  const std::size_t k = nets.actor_count;
  std::vector<int> greedy(t_count * k);
  NnWork work;
  for (std::size_t j = 0; j < k; ++j) {
    const std::vector<double> h =
        encode(nets.store, nets.actors[j].enc, features, t_count, nets.in_dim);
    const std::vector<double> logits = head_forward(
        nets.store, nets.actors[j].l1, nets.actors[j].l2, h, t_count, work);
    for (std::size_t t = 0; t < t_count; ++t) {
      double p[2];
      kernels::softmax_row(logits.data() + 2 * t, p, 2);
      greedy[t * k + j] = p[0] >= p[1] ? 0 : 1;
    }
  }
  return greedy;
}

MixtureStepper::MixtureStepper(const MixtureNets& nets, double tau)
    : nets_(&nets), tau_(tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  reset();
}

void MixtureStepper::reset() {
  const std::size_t k = nets_->actor_count;
  actor_h_.assign(k, std::vector<double>(nets_->hidden_dim, 0.0));
  state_h_.assign(nets_->alloc_hidden, 0.0);
  error_h_.assign(nets_->alloc_hidden, 0.0);
  out_.q.assign(k, 0.0);
  out_.actor_probs.assign(k * 2, 0.0);
  out_.greedy_index.assign(k, 0);
}

const MixtureStepper::Result& MixtureStepper::step(const double* features,
                                                   const double* lagged_error,
                                                   const double* noise) {
  const MixtureNets& nets = *nets_;
  const std::size_t k = nets.actor_count;
  const std::size_t ah = nets.alloc_hidden;

  gru_step_infer(nets.store, nets.alloc_state, features, 1, state_h_.data(),
                 work_);
  gru_step_infer(nets.store, nets.alloc_error, lagged_error, 1,
                 error_h_.data(), work_);
  std::vector<double> cat(2 * ah);
  std::memcpy(cat.data(), state_h_.data(), ah * sizeof(double));
  std::memcpy(cat.data() + ah, error_h_.data(), ah * sizeof(double));
  std::vector<double> logits(k);
  linear_infer(nets.store, nets.alloc_fc, cat.data(), 1, logits.data(),
               work_);
  std::vector<double> scratch;
  gate_row(logits.data(), noise, k, 1.0 / tau_, out_.q.data(), scratch);

  for (std::size_t j = 0; j < k; ++j) {
    gru_step_infer(nets.store, nets.actors[j].enc, features, 1,
                   actor_h_[j].data(), work_);
    std::vector<double> rep(nets.rep_dim);
    linear_infer(nets.store, nets.actors[j].l1, actor_h_[j].data(), 1,
                 rep.data(), work_);
    kernels::vtanh(rep.data(), rep.data(), rep.size());
    double head[2];
    linear_infer(nets.store, nets.actors[j].l2, rep.data(), 1, head, work_);
    kernels::softmax_row(head, out_.actor_probs.data() + j * 2, 2);
    out_.greedy_index[j] =
        out_.actor_probs[j * 2] >= out_.actor_probs[j * 2 + 1] ? 0 : 1;
  }
  combine_actions(out_.q.data(), out_.actor_probs.data(), k, out_.combined);
  return out_;
}

void mixture_refresh_caches(MixtureRollout& rollout, const MixtureNets& nets,
                            const MixtureConfig& mix_cfg,
                            const PpoConfig& ppo_cfg) {
  mix_cfg.validate();
  ppo_cfg.validate();
  const std::size_t t_count = rollout.size();
  const std::size_t k = nets.actor_count;
  if (t_count == 0) throw StateError("cannot refresh an empty rollout");
  if (rollout.rewards.size() != t_count)
    throw ShapeError("rewards and actions must have equal length");
  if (rollout.in_dim != nets.in_dim ||
      rollout.features.size() != t_count * rollout.in_dim)
    throw ShapeError("feature buffer does not match the network input size");
  if (rollout.actor_count != k)
    throw ShapeError("rollout actor count does not match the networks");
  if (rollout.lagged_errors.size() != t_count * k)
    throw ShapeError("lagged error buffer must be t_count x actor_count");
  if (!rollout.gumbel_noise.empty() &&
      rollout.gumbel_noise.size() != t_count * k)
    throw ShapeError("noise buffer must be empty or t_count x actor_count");
  if (!rollout.ot_targets.empty() && rollout.ot_targets.size() != t_count * k)
    throw ShapeError("target buffer must be empty or t_count x actor_count");

  rollout.window = ppo_cfg.bptt_window;
  rollout.hidden_dim = nets.hidden_dim;
  rollout.alloc_hidden = nets.alloc_hidden;

  NnWork work;
  // Gate weights under the frozen noise.
  rollout.q = allocate(nets, rollout.features, rollout.lagged_errors,
                       rollout.gumbel_noise, t_count, mix_cfg.tau);

  // Per-actor action probabilities and the combined distribution.
  std::vector<std::vector<double>> actor_h(k);
  std::vector<std::vector<double>> actor_probs(k);
  for (std::size_t j = 0; j < k; ++j) {
    actor_h[j] = encode(nets.store, nets.actors[j].enc, rollout.features,
                        t_count, rollout.in_dim);
    const std::vector<double> logits =
        head_forward(nets.store, nets.actors[j].l1, nets.actors[j].l2,
                     actor_h[j], t_count, work);
    actor_probs[j].resize(t_count * 2);
    for (std::size_t t = 0; t < t_count; ++t)
      kernels::softmax_row(logits.data() + 2 * t,
                           actor_probs[j].data() + 2 * t, 2);
  }

  rollout.old_log_probs.assign(t_count, 0.0);
  for (std::size_t t = 0; t < t_count; ++t) {
    double combined[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < k; ++j) {
      combined[0] += rollout.q[t * k + j] * actor_probs[j][t * 2 + 0];
      combined[1] += rollout.q[t * k + j] * actor_probs[j][t * 2 + 1];
    }
    const int idx = rollout.action_index[t];
    if (idx != 0 && idx != 1) throw ShapeError("stored action index invalid");
    rollout.old_log_probs[t] = std::log(combined[idx]);
  }

  const std::vector<double> critic_h = encode(
      nets.store, nets.critic.enc, rollout.features, t_count, rollout.in_dim);
  const std::vector<double> value_out =
      head_forward(nets.store, nets.critic.l1, nets.critic.l2, critic_h,
                   t_count, work);
  rollout.values.assign(value_out.begin(), value_out.end());

  std::vector<double> values_ext = rollout.values;
  values_ext.push_back(0.0);
  rollout.advantages = compute_gae(rollout.rewards, values_ext, ppo_cfg.gamma,
                                   ppo_cfg.lambda_gae);
  normalize_advantages(rollout.advantages);
  rollout.returns = discounted_returns(rollout.rewards, ppo_cfg.gamma);

  // Window-start hiddens for every recurrent stream.
  const std::size_t windows = rollout.full_windows();
  const std::size_t hid = nets.hidden_dim;
  const std::size_t ah = nets.alloc_hidden;
  const std::vector<double> state_h =
      encode(nets.store, nets.alloc_state, rollout.features, t_count,
             rollout.in_dim);
  const std::vector<double> error_h = encode(
      nets.store, nets.alloc_error, rollout.lagged_errors, t_count, k);

  rollout.actor_h0.assign(k * windows * hid, 0.0);
  rollout.critic_h0.assign(windows * hid, 0.0);
  rollout.alloc_state_h0.assign(windows * ah, 0.0);
  rollout.alloc_error_h0.assign(windows * ah, 0.0);
  for (std::size_t w = 1; w < windows; ++w) {
    const std::size_t t_prev = w * rollout.window - 1;
    for (std::size_t j = 0; j < k; ++j)
      std::copy(actor_h[j].begin() + t_prev * hid,
                actor_h[j].begin() + (t_prev + 1) * hid,
                rollout.actor_h0.begin() + (j * windows + w) * hid);
    std::copy(critic_h.begin() + t_prev * hid,
              critic_h.begin() + (t_prev + 1) * hid,
              rollout.critic_h0.begin() + w * hid);
    std::copy(state_h.begin() + t_prev * ah,
              state_h.begin() + (t_prev + 1) * ah,
              rollout.alloc_state_h0.begin() + w * ah);
    std::copy(error_h.begin() + t_prev * ah,
              error_h.begin() + (t_prev + 1) * ah,
              rollout.alloc_error_h0.begin() + w * ah);
  }
}

MixtureUpdateStats mixture_update(const MixtureRollout& rollout,
                                  MixtureNets& nets,
                                  const MixtureConfig& mix_cfg,
                                  const PpoConfig& ppo_cfg, Rng& shuffle_rng,
                                  std::size_t epochs) {
  mix_cfg.validate();
  ppo_cfg.validate();
  const std::size_t window = rollout.window;
  if (window != ppo_cfg.bptt_window)
    throw StateError("rollout caches were frozen for a different window");
  const std::size_t windows = rollout.full_windows();
  if (windows == 0)
    throw StateError("rollout holds no full window; nothing to update");
  const std::size_t k = nets.actor_count;
  if (rollout.old_log_probs.size() != rollout.size() ||
      rollout.advantages.size() != rollout.size() ||
      rollout.returns.size() != rollout.size() ||
      rollout.actor_h0.size() != k * windows * rollout.hidden_dim)
    throw StateError("rollout caches are stale; refresh them first");
  if (rollout.hidden_dim != nets.hidden_dim ||
      rollout.in_dim != nets.in_dim || rollout.actor_count != k ||
      rollout.alloc_hidden != nets.alloc_hidden)
    throw ShapeError("rollout caches do not match the network dimensions");
  if (mix_cfg.use_ot && rollout.ot_targets.size() != rollout.size() * k)
    throw StateError("alignment requested but no transport targets frozen");

  const std::size_t per_mb = ppo_cfg.windows_per_minibatch();
  const std::size_t in_dim = rollout.in_dim;
  const std::size_t hid = rollout.hidden_dim;
  const std::size_t ah = rollout.alloc_hidden;
  const double inv_tau = 1.0 / mix_cfg.tau;
  const bool noisy_gate = !rollout.gumbel_noise.empty();

  MixtureUpdateStats stats;
  Tape tape;
  std::vector<Tensor> actor_h(k), rep(k), probs(k);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const std::vector<std::size_t> order =
        shuffled_indices(windows, shuffle_rng);
    for (std::size_t start = 0; start < windows; start += per_mb) {
      const std::size_t row_count = std::min(per_mb, windows - start);
      const double denom = static_cast<double>(row_count * window);

      tape.reset();
      TapedParams tp(tape, nets.store);

      for (std::size_t j = 0; j < k; ++j) {
        actor_h[j] = tape.leaf(row_count, hid);
        for (std::size_t r = 0; r < row_count; ++r) {
          const std::size_t w = order[start + r];
          std::memcpy(actor_h[j].data() + r * hid,
                      rollout.actor_h0.data() + (j * windows + w) * hid,
                      hid * sizeof(double));
        }
      }
      Tensor critic_h = tape.leaf(row_count, hid);
      Tensor state_h = tape.leaf(row_count, ah);
      Tensor error_h = tape.leaf(row_count, ah);
      for (std::size_t r = 0; r < row_count; ++r) {
        const std::size_t w = order[start + r];
        std::memcpy(critic_h.data() + r * hid,
                    rollout.critic_h0.data() + w * hid, hid * sizeof(double));
        std::memcpy(state_h.data() + r * ah,
                    rollout.alloc_state_h0.data() + w * ah,
                    ah * sizeof(double));
        std::memcpy(error_h.data() + r * ah,
                    rollout.alloc_error_h0.data() + w * ah,
                    ah * sizeof(double));
      }

      Tensor clip_sum, v_sum, dis_sum, align_sum;
      std::vector<std::int32_t> idx(row_count);
      for (std::size_t s = 0; s < window; ++s) {
        Tensor x = tape.leaf(row_count, in_dim);
        Tensor old_lp = tape.leaf(row_count, 1);
        Tensor adv = tape.leaf(row_count, 1);
        Tensor ret = tape.leaf(row_count, 1);
        Tensor e_in = tape.leaf(row_count, k);
        Tensor g_in = tape.leaf(row_count, k);
        Tensor m_tgt;
        if (mix_cfg.use_ot) m_tgt = tape.leaf(row_count, k);
        for (std::size_t r = 0; r < row_count; ++r) {
          const std::size_t t = order[start + r] * window + s;
          std::memcpy(x.data() + r * in_dim,
                      rollout.features.data() + t * in_dim,
                      in_dim * sizeof(double));
          idx[r] = rollout.action_index[t];
          old_lp.data()[r] = rollout.old_log_probs[t];
          adv.data()[r] = rollout.advantages[t];
          ret.data()[r] = rollout.returns[t];
          std::memcpy(e_in.data() + r * k,
                      rollout.lagged_errors.data() + t * k,
                      k * sizeof(double));
          if (noisy_gate)
            std::memcpy(g_in.data() + r * k,
                        rollout.gumbel_noise.data() + t * k,
                        k * sizeof(double));
          if (mix_cfg.use_ot)
            std::memcpy(m_tgt.data() + r * k,
                        rollout.ot_targets.data() + t * k,
                        k * sizeof(double));
        }

        state_h = gru_step(tp, nets.alloc_state, state_h, x);
        error_h = gru_step(tp, nets.alloc_error, error_h, e_in);
        Tensor gate_logits =
            linear(tp, nets.alloc_fc, concat_cols(state_h, error_h));
        Tensor q = softmax_rows(scale(add(gate_logits, g_in), inv_tau));

        Tensor combined;
        for (std::size_t j = 0; j < k; ++j) {
          actor_h[j] = gru_step(tp, nets.actors[j].enc, actor_h[j], x);
          rep[j] = tanh(linear(tp, nets.actors[j].l1, actor_h[j]));
          Tensor logits = linear(tp, nets.actors[j].l2, rep[j]);
          probs[j] = softmax_rows(logits);
          Tensor weighted = mul_colvec(probs[j], slice_cols(q, j, 1));
          combined = combined.valid() ? add(combined, weighted) : weighted;
        }

        Tensor lp_new = log(gather_cols(combined, idx));
        Tensor ratio = exp(sub(lp_new, old_lp));
        Tensor unclipped = mul(ratio, adv);
        Tensor clipped = mul(
            clamp(ratio, 1.0 - ppo_cfg.eps_clip, 1.0 + ppo_cfg.eps_clip),
            adv);
        Tensor step_clip = sum_all(minimum(unclipped, clipped));
        clip_sum = clip_sum.valid() ? add(clip_sum, step_clip) : step_clip;

        if (mix_cfg.use_disentangle) {
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b) {
              Tensor pair = sum_all(mul(rep[a], rep[b]));
              dis_sum = dis_sum.valid() ? add(dis_sum, pair) : pair;
            }
        }
        if (mix_cfg.use_ot) {
          Tensor step_align = sum_all(mul(m_tgt, log(q)));
          align_sum =
              align_sum.valid() ? add(align_sum, step_align) : step_align;
        }

        critic_h = gru_step(tp, nets.critic.enc, critic_h, x);
        Tensor vrep = tanh(linear(tp, nets.critic.l1, critic_h));
        Tensor v = linear(tp, nets.critic.l2, vrep);
        Tensor diff = sub(v, ret);
        Tensor step_v = sum_all(mul(diff, diff));
        v_sum = v_sum.valid() ? add(v_sum, step_v) : step_v;
      }

      Tensor objective = scale(clip_sum, 1.0 / denom);
      if (dis_sum.valid())
        objective = sub(objective, scale(dis_sum, mix_cfg.dis_weight / denom));
      if (align_sum.valid())
        objective = add(objective, scale(align_sum, mix_cfg.lambda_ot /
                                                        denom));
      Tensor loss =
          sub(scale(v_sum, ppo_cfg.value_coeff / denom), objective);
      if (!std::isfinite(loss.value()))
        throw NumericError("non-finite loss in mixture update");
      tape.backward(loss);
      sgd_step(nets.store, tp, ppo_cfg.lr, ppo_cfg.momentum);

      stats.clip_loss += clip_sum.value() / denom;
      stats.value_loss += v_sum.value() / denom;
      if (dis_sum.valid()) stats.dis_loss += dis_sum.value() / denom;
      if (align_sum.valid()) stats.ot_align += align_sum.value() / denom;
      stats.minibatches += 1;
    }
  }
  if (stats.minibatches > 0) {
    const double m = static_cast<double>(stats.minibatches);
    stats.clip_loss /= m;
    stats.value_loss /= m;
    stats.dis_loss /= m;
    stats.ot_align /= m;
  }
  return stats;
}

}  // namespace mixtrade
