#include "mixtrade/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mixtrade/errors.hpp"
#include "mixtrade/kernels.hpp"
#include "mixtrade/tensor.hpp"

namespace mixtrade {

void PpoConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ConfigError("gamma must lie in [0, 1]");
  if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0))
    throw ConfigError("lambda_gae must lie in [0, 1]");
  if (!(eps_clip > 0.0)) throw ConfigError("eps_clip must be positive");
  if (!(lr >= 0.0)) throw ConfigError("lr must be nonnegative");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("momentum must lie in [0, 1)");
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (bptt_window == 0) throw ConfigError("bptt_window must be at least 1");
  if (batch == 0 || batch % bptt_window != 0)
    throw ConfigError("batch must be a positive multiple of bptt_window");
  if (!(value_coeff >= 0.0)) throw ConfigError("value_coeff must be >= 0");
}

PolicyNet make_policy_net(ParamStore& store, const std::string& prefix,
                          std::size_t in_dim, std::size_t hidden_dim,
                          std::size_t rep_dim) {
  PolicyNet net;
  net.enc = make_gru(store, prefix + ".enc", in_dim, hidden_dim);
  net.l1 = make_linear(store, prefix + ".l1", hidden_dim, rep_dim);
  net.l2 = make_linear(store, prefix + ".l2", rep_dim, 2);
  return net;
}

ValueNet make_value_net(ParamStore& store, const std::string& prefix,
                        std::size_t in_dim, std::size_t hidden_dim,
                        std::size_t rep_dim) {
  ValueNet net;
  net.enc = make_gru(store, prefix + ".enc", in_dim, hidden_dim);
  net.l1 = make_linear(store, prefix + ".l1", hidden_dim, rep_dim);
  net.l2 = make_linear(store, prefix + ".l2", rep_dim, 1);
  return net;
}

ActorCritic ActorCritic::create(std::size_t in_dim, std::size_t hidden_dim,
                                std::size_t rep_dim) {
  if (in_dim == 0 || hidden_dim == 0 || rep_dim == 0)
    throw ConfigError("network dimensions must be positive");
  ActorCritic ac;
  ac.in_dim = in_dim;
  ac.hidden_dim = hidden_dim;
  ac.rep_dim = rep_dim;
  ac.actor = make_policy_net(ac.store, "actor", in_dim, hidden_dim, rep_dim);
  ac.critic = make_value_net(ac.store, "critic", in_dim, hidden_dim, rep_dim);
  return ac;
}

int index_to_action(int index) {
  if (index != 0 && index != 1) throw ShapeError("action index must be 0 or 1");
  return index == 0 ? 1 : -1;
}

int action_to_index(int action) {
  if (action != 1 && action != -1) throw ShapeError("action must be +1 or -1");
  return action == 1 ? 0 : 1;
}

std::vector<double> encode(const ParamStore& store, const GruParams& gru,
                           const std::vector<double>& features,
                           std::size_t t_count, std::size_t in_dim) {
  if (features.size() != t_count * in_dim)
    throw ShapeError("feature buffer does not match t_count * in_dim");
  if (in_dim != gru.in_dim) throw ShapeError("in_dim does not match encoder");
  std::vector<double> out(t_count * gru.hidden_dim);
  std::vector<double> h(gru.hidden_dim, 0.0);
  NnWork work;
  for (std::size_t t = 0; t < t_count; ++t) {
    gru_step_infer(store, gru, features.data() + t * in_dim, 1, h.data(),
                   work);
    std::copy(h.begin(), h.end(), out.begin() + t * gru.hidden_dim);
  }
  return out;
}

void softmax2(const double logits[2], double probs[2]) {
  kernels::softmax_row(logits, probs, 2);
}

ActionSample sample_action_probs(const double probs[2], ActionMode mode,
                                 Rng& rng) {
  ActionSample s;
  if (mode == ActionMode::kEval) {
    // Ties go to index 0, i.e. the long action.
    s.index = probs[0] >= probs[1] ? 0 : 1;
  } else {
    s.index = rng.categorical(std::span<const double>(probs, 2));
  }
  s.action = index_to_action(s.index);
  s.log_prob = std::log(probs[s.index]);
  return s;
}

ActionSample sample_action(const double logits[2], ActionMode mode, Rng& rng) {
  double probs[2];
  softmax2(logits, probs);
  return sample_action_probs(probs, mode, rng);
}

std::vector<double> compute_gae(const std::vector<double>& rewards,
                                const std::vector<double>& values,
                                double gamma, double lambda) {
  if (values.size() != rewards.size() + 1)
    throw ShapeError("values must hold rewards.size() + 1 entries");
  const std::size_t t_count = rewards.size();
  std::vector<double> adv(t_count, 0.0);
  double carry = 0.0;
  for (std::size_t i = t_count; i-- > 0;) {
    const double delta = rewards[i] + gamma * values[i + 1] - values[i];
    carry = delta + gamma * lambda * carry;
    adv[i] = carry;
  }
  return adv;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma) {
  std::vector<double> out(rewards.size(), 0.0);
  double carry = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    carry = rewards[i] + gamma * carry;
    out[i] = carry;
  }
  return out;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (sd < 1e-12) {
    for (double& a : adv) a -= mean;
    return;
  }
  for (double& a : adv) a = (a - mean) / sd;
}

double clip_objective(const std::vector<double>& log_probs_new,
                      const std::vector<double>& log_probs_old,
                      const std::vector<double>& advantages, double eps_clip) {
  if (log_probs_new.size() != log_probs_old.size() ||
      log_probs_new.size() != advantages.size())
    throw ShapeError("clip_objective inputs must have equal length");
  if (log_probs_new.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < log_probs_new.size(); ++i) {
    const double ratio = std::exp(log_probs_new[i] - log_probs_old[i]);
    const double clipped =
        std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
    total += std::min(ratio * advantages[i], clipped * advantages[i]);
  }
  return total / static_cast<double>(log_probs_new.size());
}

double value_mse(const std::vector<double>& values_pred,
                 const std::vector<double>& returns) {
  if (values_pred.size() != returns.size())
    throw ShapeError("value_mse inputs must have equal length");
  if (values_pred.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < values_pred.size(); ++i) {
    const double d = values_pred[i] - returns[i];
    total += d * d;
  }
  return total / static_cast<double>(values_pred.size());
}

namespace {

// Batched head evaluation over precomputed hidden states: rep = tanh(l1 h),
// out = l2 rep. Row r of the result is bit-identical to evaluating row r
// alone, so cached values agree with the taped minibatch recompute.
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

}  // namespace

void refresh_caches(RolloutBuffer& buffer, const ActorCritic& nets,
                    const PpoConfig& cfg) {
  cfg.validate();
  const std::size_t t_count = buffer.size();
  if (t_count == 0) throw StateError("cannot refresh an empty rollout");
  if (buffer.rewards.size() != t_count)
    throw ShapeError("rewards and actions must have equal length");
  if (buffer.in_dim != nets.in_dim ||
      buffer.features.size() != t_count * buffer.in_dim)
    throw ShapeError("feature buffer does not match the network input size");

  buffer.window = cfg.bptt_window;
  buffer.hidden_dim = nets.hidden_dim;

  NnWork work;
  const std::vector<double> actor_h =
      encode(nets.store, nets.actor.enc, buffer.features, t_count,
             buffer.in_dim);
  const std::vector<double> critic_h =
      encode(nets.store, nets.critic.enc, buffer.features, t_count,
             buffer.in_dim);

  const std::vector<double> logits =
      head_forward(nets.store, nets.actor.l1, nets.actor.l2, actor_h, t_count,
                   work);
  const std::vector<double> value_out =
      head_forward(nets.store, nets.critic.l1, nets.critic.l2, critic_h,
                   t_count, work);

  buffer.old_log_probs.assign(t_count, 0.0);
  buffer.values.assign(t_count, 0.0);
  for (std::size_t t = 0; t < t_count; ++t) {
    double p[2];
    kernels::softmax_row(logits.data() + 2 * t, p, 2);
    const int idx = buffer.action_index[t];
    if (idx != 0 && idx != 1) throw ShapeError("stored action index invalid");
    buffer.old_log_probs[t] = std::log(p[idx]);
    buffer.values[t] = value_out[t];
  }

  std::vector<double> values_ext = buffer.values;
  values_ext.push_back(0.0);  // terminal bootstrap
  buffer.advantages =
      compute_gae(buffer.rewards, values_ext, cfg.gamma, cfg.lambda_gae);
  normalize_advantages(buffer.advantages);
  buffer.returns = discounted_returns(buffer.rewards, cfg.gamma);

  // Window-start hiddens: window w resumes from the hidden state after the
  // last step of window w-1; those rows become truncation leaves.
  const std::size_t windows = buffer.full_windows();
  const std::size_t h = nets.hidden_dim;
  buffer.actor_h0.assign(windows * h, 0.0);
  buffer.critic_h0.assign(windows * h, 0.0);
  for (std::size_t w = 1; w < windows; ++w) {
    const std::size_t t_prev = w * buffer.window - 1;
    std::copy(actor_h.begin() + t_prev * h, actor_h.begin() + (t_prev + 1) * h,
              buffer.actor_h0.begin() + w * h);
    std::copy(critic_h.begin() + t_prev * h,
              critic_h.begin() + (t_prev + 1) * h,
              buffer.critic_h0.begin() + w * h);
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i) + 1));
    std::swap(order[i], order[j]);
  }
  return order;
}

UpdateStats ppo_update(const RolloutBuffer& buffer, ActorCritic& nets,
                       const PpoConfig& cfg, Rng& shuffle_rng,
                       std::size_t epochs) {
  cfg.validate();
  const std::size_t window = buffer.window;
  if (window != cfg.bptt_window)
    throw StateError("buffer caches were frozen for a different window");
  const std::size_t windows = buffer.full_windows();
  if (windows == 0)
    throw StateError("rollout holds no full window; nothing to update");
  if (buffer.old_log_probs.size() != buffer.size() ||
      buffer.advantages.size() != buffer.size() ||
      buffer.returns.size() != buffer.size() ||
      buffer.actor_h0.size() != windows * buffer.hidden_dim)
    throw StateError("buffer caches are stale; call refresh_caches first");
  if (buffer.hidden_dim != nets.hidden_dim || buffer.in_dim != nets.in_dim)
    throw ShapeError("buffer caches do not match the network dimensions");

  const std::size_t per_mb = cfg.windows_per_minibatch();
  const std::size_t in_dim = buffer.in_dim;
  const std::size_t hid = buffer.hidden_dim;

  UpdateStats stats;
  Tape tape;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(windows,
                                                            shuffle_rng);
    for (std::size_t start = 0; start < windows; start += per_mb) {
      const std::size_t row_count = std::min(per_mb, windows - start);
      const double denom = static_cast<double>(row_count * window);

      tape.reset();
      TapedParams tp(tape, nets.store);

      Tensor actor_h = tape.leaf(row_count, hid);
      Tensor critic_h = tape.leaf(row_count, hid);
      for (std::size_t r = 0; r < row_count; ++r) {
        const std::size_t w = order[start + r];
        std::memcpy(actor_h.data() + r * hid, buffer.actor_h0.data() + w * hid,
                    hid * sizeof(double));
        std::memcpy(critic_h.data() + r * hid,
                    buffer.critic_h0.data() + w * hid, hid * sizeof(double));
      }

      Tensor clip_sum;
      Tensor v_sum;
      std::vector<std::int32_t> idx(row_count);
      for (std::size_t s = 0; s < window; ++s) {
        Tensor x = tape.leaf(row_count, in_dim);
        Tensor old_lp = tape.leaf(row_count, 1);
        Tensor adv = tape.leaf(row_count, 1);
        Tensor ret = tape.leaf(row_count, 1);
        for (std::size_t r = 0; r < row_count; ++r) {
          const std::size_t t = order[start + r] * window + s;
          std::memcpy(x.data() + r * in_dim, buffer.features.data() +
                          t * in_dim, in_dim * sizeof(double));
          idx[r] = buffer.action_index[t];
          old_lp.data()[r] = buffer.old_log_probs[t];
          adv.data()[r] = buffer.advantages[t];
          ret.data()[r] = buffer.returns[t];
        }

        actor_h = gru_step(tp, nets.actor.enc, actor_h, x);
        Tensor rep = tanh(linear(tp, nets.actor.l1, actor_h));
        Tensor logits = linear(tp, nets.actor.l2, rep);
        Tensor probs = softmax_rows(logits);
        Tensor lp_new = log(gather_cols(probs, idx));
        Tensor ratio = exp(sub(lp_new, old_lp));
        Tensor unclipped = mul(ratio, adv);
        Tensor clipped =
            mul(clamp(ratio, 1.0 - cfg.eps_clip, 1.0 + cfg.eps_clip), adv);
        Tensor step_clip = sum_all(minimum(unclipped, clipped));
        clip_sum = clip_sum.valid() ? add(clip_sum, step_clip) : step_clip;

        critic_h = gru_step(tp, nets.critic.enc, critic_h, x);
        Tensor vrep = tanh(linear(tp, nets.critic.l1, critic_h));
        Tensor v = linear(tp, nets.critic.l2, vrep);
        Tensor diff = sub(v, ret);
        Tensor step_v = sum_all(mul(diff, diff));
        v_sum = v_sum.valid() ? add(v_sum, step_v) : step_v;
      }

      Tensor loss = sub(scale(v_sum, cfg.value_coeff / denom),
                        scale(clip_sum, 1.0 / denom));
      if (!std::isfinite(loss.value()))
        throw NumericError("non-finite loss in policy update");
      tape.backward(loss);
      sgd_step(nets.store, tp, cfg.lr, cfg.momentum);

      stats.clip_loss += clip_sum.value() / denom;
      stats.value_loss += v_sum.value() / denom;
      stats.minibatches += 1;
    }
  }
  if (stats.minibatches > 0) {
    stats.clip_loss /= static_cast<double>(stats.minibatches);
    stats.value_loss /= static_cast<double>(stats.minibatches);
  }
  return stats;
}

}  // namespace mixtrade
