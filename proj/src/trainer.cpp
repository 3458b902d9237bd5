#include "mixtrade/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <span>
#include <string>
#include <utility>

#include "mixtrade/errors.hpp"
#include "mixtrade/kernels.hpp"
#include "mixtrade/tensor.hpp"

namespace mixtrade {
namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void emit(std::vector<std::string>& log, const nlohmann::json& j) {
  log.push_back(j.dump());
}

// Rethrows numeric failures with the phase stamped on, so an aborted run
// says where it died.
template <typename Fn>
auto with_phase(const char* phase, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(std::string("phase=") + phase + ": " + e.what());
  }
}

// Everything both trainers derive from the raw bars before any phase
// runs: indicators, the split, the scaler, the next-close teacher labels
// (teacher[b] grades an action taken at bar b) and the expert signals
// over the training window.
struct RunSetup {
  IndicatorSeries indicators;
  SplitIndices split;
  FeatureBuilder builder;
  std::vector<int> teacher;
  std::vector<int> expert_sig;
};

RunSetup make_setup(const TrainConfig& cfg, const std::vector<Bar>& bars) {
  RunSetup s;
  s.indicators = compute_indicators(bars, default_indicators());
  s.split = compute_split(bars, s.indicators, cfg.expert, cfg.train_split);
  s.builder = FeatureBuilder{fit_market_scaler(bars, s.indicators,
                                               s.split.warm_up,
                                               s.split.train_end),
                             cfg.env};
  std::vector<double> closes(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) closes[i] = bars[i].close;
  s.teacher = teacher_actions(closes);
  s.expert_sig = dual_thrust_series(bars, cfg.expert, s.split.warm_up,
                                    s.split.train_end);
  return s;
}

// Sequential single-step policy evaluation for the plain trainer,
// op-for-op the per-actor block of MixtureStepper so the k=1 mixture
// walks bit-identical trajectories.
struct PlainStepper {
  const ActorCritic* nets;
  std::vector<double> h;
  NnWork work;
  double probs[2] = {0.0, 0.0};

  explicit PlainStepper(const ActorCritic& n)
      : nets(&n), h(n.hidden_dim, 0.0) {}

  const double* step(const double* x) {
    gru_step_infer(nets->store, nets->actor.enc, x, 1, h.data(), work);
    std::vector<double> rep(nets->rep_dim);
    linear_infer(nets->store, nets->actor.l1, h.data(), 1, rep.data(), work);
    kernels::vtanh(rep.data(), rep.data(), rep.size());
    double head[2];
    linear_infer(nets->store, nets->actor.l2, rep.data(), 1, head, work);
    kernels::softmax_row(head, probs, 2);
    return probs;
  }
};

nlohmann::json ppo_round_line(std::size_t round, double mean_reward) {
  return nlohmann::json{{"phase", "ppo"},
                        {"epoch", round},
                        {"mean_reward", mean_reward}};
}

}  // namespace

void TrainConfig::validate() const {
  if (!(train_split > 0.0 && train_split < 1.0))
    throw ConfigError("train: train_split must lie in (0, 1)");
  if (hidden_dim == 0 || rep_dim == 0 || alloc_hidden == 0)
    throw ConfigError("train: network dims must be positive");
  if (!std::isfinite(pretrain_lr) || pretrain_lr < 0.0)
    throw ConfigError("train: pretrain_lr must be finite and non-negative");
  env.validate();
  ppo.validate();
  mixture.validate();
  expert.validate();
}

SplitIndices compute_split(const std::vector<Bar>& bars,
                           const IndicatorSeries& indicators,
                           const DualThrustParams& expert,
                           double train_split) {
  if (!(train_split > 0.0 && train_split < 1.0))
    throw ConfigError("split: train_split must lie in (0, 1)");
  if (indicators.bar_count != bars.size())
    throw StateError("split: indicator series does not cover the bars");

  SplitIndices s;
  s.series_end = bars.size();
  s.warm_up =
      std::max({indicators.first_valid, expert.lookback, std::size_t{1}});
  if (s.warm_up + 2 > s.series_end)
    throw DataError("split: series ends inside the warm-up (" +
                    std::to_string(s.series_end) + " bars, warm-up " +
                    std::to_string(s.warm_up) + ")");
  const std::size_t tradable = s.series_end - s.warm_up;
  auto train_steps = static_cast<std::size_t>(
      std::floor(static_cast<double>(tradable) * train_split));
  train_steps = std::clamp<std::size_t>(train_steps, 1, tradable - 1);
  s.train_end = s.warm_up + train_steps;
  return s;
}

DemonstrationBuffer fill_demo_buffer(TradingEnv& env,
                                     const FeatureBuilder& builder,
                                     const std::vector<int>& expert_actions) {
  env.reset();
  DemonstrationBuffer db;
  RolloutBuffer& r = db.data;
  r.in_dim = builder.dim();
  std::vector<double> row(r.in_dim);
  while (!env.done()) {
    const std::size_t i = env.cursor() - env.start();
    if (i >= expert_actions.size())
      throw StateError("demo buffer: expert series shorter than the episode");
    builder.build(env.observation(), row.data());
    r.features.insert(r.features.end(), row.begin(), row.end());
    r.action_index.push_back(action_to_index(expert_actions[i]));
    const Transition tr = env.step(expert_actions[i]);
    r.rewards.push_back(tr.reward);
  }
  return db;
}

std::vector<double> pretrain_actors(ParamStore& store,
                                    std::vector<PolicyNet>& actors,
                                    const std::vector<double>& features,
                                    const std::vector<int>& action_index,
                                    std::size_t in_dim, const PpoConfig& cfg,
                                    double lr, std::size_t epochs,
                                    Rng& shuffle_rng) {
  cfg.validate();
  if (!std::isfinite(lr) || lr < 0.0)
    throw ConfigError("pretrain: lr must be finite and non-negative");
  if (actors.empty()) throw ShapeError("pretrain: no actors");
  const std::size_t t_count = action_index.size();
  if (features.size() != t_count * in_dim)
    throw ShapeError("pretrain: features do not match the action count");

  const std::size_t window = cfg.bptt_window;
  const std::size_t windows = t_count / window;
  if (windows == 0)
    throw StateError("pretrain: trajectory shorter than one window");
  const std::size_t per_mb = cfg.windows_per_minibatch();
  const std::size_t k = actors.size();

  std::vector<double> per_epoch;
  per_epoch.reserve(epochs);
  std::vector<std::vector<double>> h0(k);
  std::size_t hid = 0;
  Tape tape;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    // Window-start hiddens frozen under the current parameters, exactly
    // like the on-policy cache refresh.
    for (std::size_t a = 0; a < k; ++a) {
      const std::vector<double> hs =
          encode(store, actors[a].enc, features, t_count, in_dim);
      hid = hs.size() / t_count;
      h0[a].assign(windows * hid, 0.0);
      for (std::size_t w = 1; w < windows; ++w)
        std::memcpy(h0[a].data() + w * hid,
                    hs.data() + (w * window - 1) * hid, hid * sizeof(double));
    }

    const std::vector<std::size_t> order =
        shuffled_indices(windows, shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t minibatches = 0;
    for (std::size_t start = 0; start < windows; start += per_mb) {
      const std::size_t row_count = std::min(per_mb, windows - start);
      const double denom =
          static_cast<double>(row_count * window) * static_cast<double>(k);

      tape.reset();
      TapedParams tp(tape, store);
      std::vector<Tensor> h(k);
      for (std::size_t a = 0; a < k; ++a) {
        h[a] = tape.leaf(row_count, hid);
        for (std::size_t r = 0; r < row_count; ++r)
          std::memcpy(h[a].data() + r * hid,
                      h0[a].data() + order[start + r] * hid,
                      hid * sizeof(double));
      }

      Tensor ce_total;
      std::vector<std::int32_t> idx(row_count);
      for (std::size_t s = 0; s < window; ++s) {
        Tensor x = tape.leaf(row_count, in_dim);
        for (std::size_t r = 0; r < row_count; ++r) {
          const std::size_t t = order[start + r] * window + s;
          std::memcpy(x.data() + r * in_dim, features.data() + t * in_dim,
                      in_dim * sizeof(double));
          idx[r] = action_index[t];
        }
        for (std::size_t a = 0; a < k; ++a) {
          h[a] = gru_step(tp, actors[a].enc, h[a], x);
          Tensor rep = tanh(linear(tp, actors[a].l1, h[a]));
          Tensor logits = linear(tp, actors[a].l2, rep);
          Tensor picked = gather_cols(log_softmax_rows(logits), idx);
          Tensor step_ce = sum_all(picked);
          ce_total = ce_total.valid() ? add(ce_total, step_ce) : step_ce;
        }
      }

      Tensor loss = scale(ce_total, -1.0 / denom);
      if (!std::isfinite(loss.value()))
        throw NumericError("pretrain: non-finite cross-entropy");
      tape.backward(loss);
      sgd_step(store, tp, lr, cfg.momentum);
      epoch_loss += loss.value();
      ++minibatches;
    }
    per_epoch.push_back(epoch_loss / static_cast<double>(minibatches));
  }
  return per_epoch;
}

MixtureTrainResult train_mixture(const TrainConfig& cfg,
                                 const std::vector<Bar>& bars) {
  cfg.validate();
  RunSetup setup = make_setup(cfg, bars);
  MixtureConfig mix = cfg.mixture;
  if (mix.lambda_ot <= 0.0) mix.use_ot = false;
  const std::size_t k = mix.actor_count;
  const std::size_t in_dim = setup.builder.dim();
  const bool dis_active = mix.use_disentangle && k > 1;
  const bool ot_active = mix.use_ot;

  MixtureTrainResult out;
  out.split = setup.split;
  out.builder = setup.builder;

  Rng init_rng(Rng::derive(cfg.seed, rng_role::kInit));
  Rng action_rng(Rng::derive(cfg.seed, rng_role::kAction));
  Rng gumbel_rng(Rng::derive(cfg.seed, rng_role::kGumbel));
  Rng shuffle_rng(Rng::derive(cfg.seed, rng_role::kShuffle));

  out.nets = MixtureNets::create(k, in_dim, cfg.hidden_dim, cfg.rep_dim,
                                 cfg.alloc_hidden);
  out.nets.store.init_uniform(init_rng);

  TradingEnv env(bars, setup.indicators, cfg.env, setup.split.warm_up,
                 setup.split.train_end);
  out.demo = fill_demo_buffer(env, setup.builder, setup.expert_sig);
  const DemonstrationBuffer& demo = out.demo;
  const std::size_t demo_len = demo.data.size();

  if (cfg.pretrain && cfg.pretrain_epochs > 0) {
    const std::vector<double> ce = with_phase("pretrain", [&] {
      return pretrain_actors(out.nets.store, out.nets.actors,
                             demo.data.features, demo.data.action_index,
                             in_dim, cfg.ppo, cfg.pretrain_lr,
                             cfg.pretrain_epochs, shuffle_rng);
    });
    for (std::size_t e = 0; e < ce.size(); ++e)
      emit(out.log,
           {{"phase", "pretrain"}, {"epoch", e}, {"ce_loss", ce[e]}});
  }

  emit(out.log, {{"phase", "demo_buffer"},
                 {"samples", demo_len},
                 {"mean_reward", mean_of(demo.data.rewards)}});

  // Teacher labels and validity per demonstration row; only the final
  // training bar lacks a next close inside the window.
  std::vector<int> demo_teacher(demo_len, -1);
  std::vector<char> demo_valid(demo_len, 0);
  for (std::size_t i = 0; i < demo_len; ++i) {
    const std::size_t b = setup.split.warm_up + i;
    if (b + 1 < setup.split.train_end) {
      demo_teacher[i] = setup.teacher[b];
      demo_valid[i] = 1;
    }
  }

  for (std::size_t e = 0; e < cfg.imitation_epochs; ++e) {
    const MixtureUpdateStats stats = with_phase("imitation", [&] {
      MixtureRollout r;
      r.in_dim = in_dim;
      r.actor_count = k;
      r.features = demo.data.features;
      r.action_index = demo.data.action_index;
      r.rewards = demo.data.rewards;
      const std::vector<int> greedy =
          mixture_greedy_actions(out.nets, r.features, demo_len);
      r.lagged_errors.assign(demo_len * k, 0.0);
      for (std::size_t i = 1; i < demo_len; ++i) {
        if (!demo_valid[i - 1]) continue;
        for (std::size_t j = 0; j < k; ++j)
          r.lagged_errors[i * k + j] = static_cast<double>(
              demo_teacher[i - 1] -
              index_to_action(greedy[(i - 1) * k + j]));
      }
      r.gumbel_noise.resize(demo_len * k);
      gumbel_rng.fill_gumbel(r.gumbel_noise);
      if (ot_active)
        r.ot_targets = ot_targets(demo_teacher, demo_valid, greedy, k, mix);
      mixture_refresh_caches(r, out.nets, mix, cfg.ppo);
      return mixture_update(r, out.nets, mix, cfg.ppo, shuffle_rng, 1);
    });
    nlohmann::json j{{"phase", "imitation"},
                     {"epoch", e},
                     {"clip_loss", stats.clip_loss},
                     {"value_loss", stats.value_loss},
                     {"mean_reward", mean_of(demo.data.rewards)}};
    if (dis_active) j["dis_loss"] = stats.dis_loss;
    if (ot_active) j["ot_align"] = stats.ot_align;
    emit(out.log, j);
  }

  env.reset();
  std::vector<double> feat_row(in_dim);
  std::vector<double> noise_row(k);
  std::vector<double> prev_e(k, 0.0);
  for (std::size_t round = 0; round < cfg.ppo_rounds; ++round) {
    MixtureRollout r;
    r.in_dim = in_dim;
    r.actor_count = k;
    std::vector<int> teach;
    std::vector<char> valid;
    std::vector<int> greedy_flat;
    std::vector<std::size_t> row_bars;

    with_phase("ppo", [&] {
      if (env.done()) env.reset();
      MixtureStepper stepper(out.nets, mix.tau);
      std::fill(prev_e.begin(), prev_e.end(), 0.0);
      for (std::size_t s = 0; s < cfg.ppo.batch; ++s) {
        const std::size_t t = env.cursor();
        setup.builder.build(env.observation(), feat_row.data());
        gumbel_rng.fill_gumbel(noise_row);
        const MixtureStepper::Result& res =
            stepper.step(feat_row.data(), prev_e.data(), noise_row.data());
        const ActionSample as =
            sample_action_probs(res.combined, ActionMode::kTrain, action_rng);

        r.features.insert(r.features.end(), feat_row.begin(), feat_row.end());
        r.action_index.push_back(as.index);
        r.lagged_errors.insert(r.lagged_errors.end(), prev_e.begin(),
                               prev_e.end());
        r.gumbel_noise.insert(r.gumbel_noise.end(), noise_row.begin(),
                              noise_row.end());
        greedy_flat.insert(greedy_flat.end(), res.greedy_index.begin(),
                           res.greedy_index.end());
        const bool tv = t + 1 < setup.split.train_end;
        teach.push_back(tv ? setup.teacher[t] : -1);
        valid.push_back(tv ? 1 : 0);
        row_bars.push_back(t);

        const Transition tr = env.step(as.action);
        r.rewards.push_back(tr.reward);
        if (tv)
          for (std::size_t j = 0; j < k; ++j)
            prev_e[j] = static_cast<double>(
                teach.back() - index_to_action(res.greedy_index[j]));
        else
          std::fill(prev_e.begin(), prev_e.end(), 0.0);
        if (tr.done) break;
      }
      if (ot_active)
        r.ot_targets = ot_targets(teach, valid, greedy_flat, k, mix);
    });

    nlohmann::json j = ppo_round_line(round, mean_of(r.rewards));
    if (r.size() >= cfg.ppo.bptt_window) {
      const MixtureUpdateStats stats = with_phase("ppo", [&] {
        mixture_refresh_caches(r, out.nets, mix, cfg.ppo);
        return mixture_update(r, out.nets, mix, cfg.ppo, shuffle_rng,
                              cfg.ppo.epochs);
      });
      j["clip_loss"] = stats.clip_loss;
      j["value_loss"] = stats.value_loss;
      if (dis_active) j["dis_loss"] = stats.dis_loss;
      if (ot_active) j["ot_align"] = stats.ot_align;
      out.final_gate = r.q;  // frozen under the pre-update parameters
      out.final_gate_bars = row_bars;
    } else {
      // tail stub shorter than one window: nothing to update on
      j["clip_loss"] = 0.0;
      j["value_loss"] = 0.0;
    }
    emit(out.log, j);
  }

  return out;
}

PlainTrainResult train_plain(const TrainConfig& cfg,
                             const std::vector<Bar>& bars) {
  cfg.validate();
  RunSetup setup = make_setup(cfg, bars);
  const std::size_t in_dim = setup.builder.dim();

  PlainTrainResult out;
  out.split = setup.split;
  out.builder = setup.builder;

  Rng init_rng(Rng::derive(cfg.seed, rng_role::kInit));
  Rng action_rng(Rng::derive(cfg.seed, rng_role::kAction));
  Rng shuffle_rng(Rng::derive(cfg.seed, rng_role::kShuffle));

  out.nets = ActorCritic::create(in_dim, cfg.hidden_dim, cfg.rep_dim);
  out.nets.store.init_uniform(init_rng);

  TradingEnv env(bars, setup.indicators, cfg.env, setup.split.warm_up,
                 setup.split.train_end);
  out.demo = fill_demo_buffer(env, setup.builder, setup.expert_sig);
  const DemonstrationBuffer& demo = out.demo;

  if (cfg.pretrain && cfg.pretrain_epochs > 0) {
    std::vector<PolicyNet> solo{out.nets.actor};
    const std::vector<double> ce = with_phase("pretrain", [&] {
      return pretrain_actors(out.nets.store, solo, demo.data.features,
                             demo.data.action_index, in_dim, cfg.ppo,
                             cfg.pretrain_lr, cfg.pretrain_epochs,
                             shuffle_rng);
    });
    for (std::size_t e = 0; e < ce.size(); ++e)
      emit(out.log,
           {{"phase", "pretrain"}, {"epoch", e}, {"ce_loss", ce[e]}});
  }

  emit(out.log, {{"phase", "demo_buffer"},
                 {"samples", demo.data.size()},
                 {"mean_reward", mean_of(demo.data.rewards)}});

  for (std::size_t e = 0; e < cfg.imitation_epochs; ++e) {
    const UpdateStats stats = with_phase("imitation", [&] {
      RolloutBuffer r = demo.data;
      refresh_caches(r, out.nets, cfg.ppo);
      return ppo_update(r, out.nets, cfg.ppo, shuffle_rng, 1);
    });
    emit(out.log, {{"phase", "imitation"},
                   {"epoch", e},
                   {"clip_loss", stats.clip_loss},
                   {"value_loss", stats.value_loss},
                   {"mean_reward", mean_of(demo.data.rewards)}});
  }

  env.reset();
  std::vector<double> feat_row(in_dim);
  for (std::size_t round = 0; round < cfg.ppo_rounds; ++round) {
    RolloutBuffer r;
    r.in_dim = in_dim;

    with_phase("ppo", [&] {
      if (env.done()) env.reset();
      PlainStepper stepper(out.nets);
      for (std::size_t s = 0; s < cfg.ppo.batch; ++s) {
        setup.builder.build(env.observation(), feat_row.data());
        const double* probs = stepper.step(feat_row.data());
        const ActionSample as =
            sample_action_probs(probs, ActionMode::kTrain, action_rng);
        r.features.insert(r.features.end(), feat_row.begin(), feat_row.end());
        r.action_index.push_back(as.index);
        const Transition tr = env.step(as.action);
        r.rewards.push_back(tr.reward);
        if (tr.done) break;
      }
    });

    nlohmann::json j = ppo_round_line(round, mean_of(r.rewards));
    if (r.size() >= cfg.ppo.bptt_window) {
      const UpdateStats stats = with_phase("ppo", [&] {
        refresh_caches(r, out.nets, cfg.ppo);
        return ppo_update(r, out.nets, cfg.ppo, shuffle_rng, cfg.ppo.epochs);
      });
      j["clip_loss"] = stats.clip_loss;
      j["value_loss"] = stats.value_loss;
    } else {
      j["clip_loss"] = 0.0;
      j["value_loss"] = 0.0;
    }
    emit(out.log, j);
  }

  return out;
}

nlohmann::json mixture_checkpoint(const MixtureNets& nets,
                                  const FeatureBuilder& builder,
                                  const TrainConfig& cfg,
                                  const SplitIndices& split) {
  nlohmann::json j;
  j["kind"] = "mixture";
  j["actor_count"] = nets.actor_count;
  j["in_dim"] = nets.in_dim;
  j["hidden_dim"] = nets.hidden_dim;
  j["rep_dim"] = nets.rep_dim;
  j["alloc_hidden"] = nets.alloc_hidden;
  j["tau"] = cfg.mixture.tau;
  j["params"] = nets.store.to_json();
  j["scaler"] = builder.scaler.to_json();
  j["env"] = {{"fee_rate", builder.cfg.fee_rate},
              {"slippage", builder.cfg.slippage},
              {"margin_threshold", builder.cfg.margin_threshold},
              {"initial_capital", builder.cfg.initial_capital},
              {"ema_decay", builder.cfg.ema_decay},
              {"dsr_eps", builder.cfg.dsr_eps}};
  j["expert"] = {{"lookback", cfg.expert.lookback},
                 {"k1", cfg.expert.k1},
                 {"k2", cfg.expert.k2}};
  j["split"] = {{"warm_up", split.warm_up},
                {"train_end", split.train_end},
                {"series_end", split.series_end}};
  return j;
}

LoadedMixture load_mixture_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "mixture")
      throw ConfigError("checkpoint: kind is not \"mixture\"");
    LoadedMixture lm;
    lm.nets = MixtureNets::create(
        j.at("actor_count").get<std::size_t>(),
        j.at("in_dim").get<std::size_t>(),
        j.at("hidden_dim").get<std::size_t>(),
        j.at("rep_dim").get<std::size_t>(),
        j.at("alloc_hidden").get<std::size_t>());
    lm.nets.store.load_json(j.at("params"));
    lm.builder.scaler = FeatureScaler::from_json(j.at("scaler"));
    const nlohmann::json& je = j.at("env");
    lm.builder.cfg.fee_rate = je.at("fee_rate").get<double>();
    lm.builder.cfg.slippage = je.at("slippage").get<double>();
    lm.builder.cfg.margin_threshold = je.at("margin_threshold").get<double>();
    lm.builder.cfg.initial_capital = je.at("initial_capital").get<double>();
    lm.builder.cfg.ema_decay = je.at("ema_decay").get<double>();
    lm.builder.cfg.dsr_eps = je.at("dsr_eps").get<double>();
    lm.builder.cfg.validate();
    const nlohmann::json& jx = j.at("expert");
    lm.expert.lookback = jx.at("lookback").get<std::size_t>();
    lm.expert.k1 = jx.at("k1").get<double>();
    lm.expert.k2 = jx.at("k2").get<double>();
    lm.expert.validate();
    const nlohmann::json& js = j.at("split");
    lm.split.warm_up = js.at("warm_up").get<std::size_t>();
    lm.split.train_end = js.at("train_end").get<std::size_t>();
    lm.split.series_end = js.at("series_end").get<std::size_t>();
    lm.tau = j.at("tau").get<double>();
    if (!(lm.tau > 0.0))
      throw ConfigError("checkpoint: tau must be positive");
    if (lm.builder.dim() != lm.nets.in_dim)
      throw ConfigError(
          "checkpoint: scaler dimension does not match the network input");
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
}

}  // namespace mixtrade
