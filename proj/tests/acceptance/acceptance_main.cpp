// Acceptance gate: one self-contained check per criterion, each printing
// a single [PASS]/[FAIL] line. Every check carries its own oracle —
// enumeration, refolding, finite differences or byte comparison — so a
// regression in the library cannot hide behind a shared helper.
//
//   acceptance_tests            runs everything
//   acceptance_tests --only N   runs criterion N alone
//
// The exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mixtrade/backtest.hpp"
#include "mixtrade/cli.hpp"
#include "mixtrade/config.hpp"
#include "mixtrade/data.hpp"
#include "mixtrade/env.hpp"
#include "mixtrade/errors.hpp"
#include "mixtrade/expert.hpp"
#include "mixtrade/manifest.hpp"
#include "mixtrade/mixture.hpp"
#include "mixtrade/nn.hpp"
#include "mixtrade/ot.hpp"
#include "mixtrade/ppo.hpp"
#include "mixtrade/rng.hpp"
#include "mixtrade/tensor.hpp"
#include "mixtrade/trainer.hpp"
#include "support/grad_suites.hpp"

namespace {

using namespace mixtrade;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void expect(bool ok, const std::string& why) {
    if (!ok) fail(why);
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- 1 ----
// The printed position-transition table, all six rows, exactly.

Outcome check_transition_table() {
  Outcome out;
  struct Row {
    int position, action, next, delta;
  };
  const std::vector<Row> rows = {
      {0, 1, 1, 1},    {1, 1, 1, 0},    {-1, 1, 1, 2},
      {0, -1, -1, -1}, {-1, -1, -1, 0}, {1, -1, -1, -2},
  };
  for (const Row& r : rows) {
    const ApplyResult got = apply_action(r.position, r.action);
    out.expect(got.new_position == r.next && got.delta_po == r.delta,
               "row (" + std::to_string(r.position) + "," +
                   std::to_string(r.action) + ") gave (" +
                   std::to_string(got.new_position) + "," +
                   std::to_string(got.delta_po) + ")");
  }
  // the six rows are the whole domain; anything else must refuse
  bool threw = false;
  try {
    apply_action(2, 1);
  } catch (const StateError&) {
    threw = true;
  }
  out.expect(threw, "position 2 accepted");
  threw = false;
  try {
    apply_action(0, 0);
  } catch (const StateError&) {
    threw = true;
  }
  out.expect(threw, "action 0 accepted");
  return out;
}

// ---------------------------------------------------------------- 2 ----
// Incremental differential-Sharpe stream against a from-scratch EMA
// refold at every step of 1000 random profit streams.

Outcome check_dsr_stream() {
  Outcome out;
  EnvConfig cfg;
  Rng rng(2024);
  std::size_t guard_hits = 0;

  for (int stream = 0; stream < 1000 && out.pass; ++stream) {
    const std::size_t T = 500;
    const double scale = std::exp(rng.uniform(-2.0, 5.0));
    std::vector<double> profits(T);
    for (auto& p : profits) p = rng.uniform(-scale, scale);
    // some streams open flat so the variance guard engages mid-stream
    if (stream % 7 == 0)
      for (std::size_t i = 0; i < 5; ++i) profits[i] = profits[0];

    // incremental pass, state carried forward
    std::vector<double> incremental(T);
    DsrState state;
    for (std::size_t t = 0; t < T; ++t) {
      const DsrResult r = compute_dsr(state, profits[t], cfg);
      incremental[t] = r.reward;
      state = r.next;
    }

    // oracle: refold both moment EMAs from scratch for every step
    for (std::size_t t = 0; t < T; ++t) {
      double a = 0.0, b = 0.0;
      for (std::size_t i = 0; i < t; ++i) {
        a += cfg.ema_decay * (profits[i] - a);
        b += cfg.ema_decay * (profits[i] * profits[i] - b);
      }
      const double da = profits[t] - a;
      const double db = profits[t] * profits[t] - b;
      const double denom = b - a * a;
      double expected = 0.0;
      if (denom <= cfg.dsr_eps)
        ++guard_hits;
      else
        expected = (b * da - 0.5 * a * db) / std::pow(denom, 1.5);
      if (std::fabs(incremental[t] - expected) > 1e-10) {
        out.fail("stream " + std::to_string(stream) + " step " +
                 std::to_string(t) + ": " + fmt(incremental[t]) + " vs " +
                 fmt(expected));
        break;
      }
    }
  }
  out.expect(guard_hits > 0, "variance guard never engaged");
  return out;
}

// ---------------------------------------------------------------- 3 ----
// Central finite differences over every tensor op and a 5-step GRU
// backpropagation-through-time graph, 20 seeds.

Outcome check_gradient_suite() {
  Outcome out;
  for (std::uint64_t seed = 1; seed <= 20 && out.pass; ++seed) {
    for (const auto& res : support::op_gradient_suite(seed)) {
      if (res.max_rel_err >= 1e-4) {
        out.fail("op " + res.op + " seed " + std::to_string(seed) +
                 " rel err " + fmt(res.max_rel_err));
        break;
      }
    }
    const double gru_err = support::gru_bptt_fd_err(seed, 5);
    out.expect(gru_err < 1e-4, "gru bptt seed " + std::to_string(seed) +
                                   " rel err " + fmt(gru_err));
  }
  return out;
}

// ---------------------------------------------------------------- 4 ----
// Advantage recursion against the quadratic-time discounted sum of
// one-step errors; with lambda = 0 the advantage is the error itself.

Outcome check_gae_oracle() {
  Outcome out;
  Rng rng(404);
  for (int seq = 0; seq < 200 && out.pass; ++seq) {
    const std::size_t T = 1 + static_cast<std::size_t>(rng.uniform() * 60);
    const double gamma = rng.uniform(0.8, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    std::vector<double> rewards(T), values(T + 1);
    for (auto& r : rewards) r = rng.uniform(-2.0, 2.0);
    for (auto& v : values) v = rng.uniform(-2.0, 2.0);

    const std::vector<double> fast = compute_gae(rewards, values, gamma,
                                                 lambda);
    std::vector<double> delta(T);
    for (std::size_t t = 0; t < T; ++t)
      delta[t] = rewards[t] + gamma * values[t + 1] - values[t];

    for (std::size_t t = 0; t < T && out.pass; ++t) {
      double slow = 0.0;
      double w = 1.0;
      for (std::size_t k = t; k < T; ++k) {
        slow += w * delta[k];
        w *= gamma * lambda;
      }
      out.expect(std::fabs(fast[t] - slow) <= 1e-10,
                 "seq " + std::to_string(seq) + " t " + std::to_string(t) +
                     ": " + fmt(fast[t]) + " vs " + fmt(slow));
    }

    const std::vector<double> no_trace = compute_gae(rewards, values, gamma,
                                                     0.0);
    for (std::size_t t = 0; t < T && out.pass; ++t)
      out.expect(no_trace[t] == delta[t],
                 "lambda=0 not exact at t=" + std::to_string(t));
  }
  return out;
}

// ---------------------------------------------------------------- 5 ----
// Entropic transport at epsilon 0.01 on binary {0,2} costs, rounded to a
// hard assignment, against exhaustive enumeration of all fair splits.

Outcome check_transport_vs_enumeration() {
  Outcome out;
  Rng rng(505);
  const std::vector<double> w = {0.5, 0.5};
  for (int inst = 0; inst < 500 && out.pass; ++inst) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 6.0);
    const std::size_t k = 2;
    std::vector<double> cost(n * k);
    for (auto& c : cost) c = rng.uniform() < 0.5 ? 0.0 : 2.0;

    TransportProblem problem = TransportProblem::balanced(n, k, cost, 0.01);
    problem.max_iters = 2000;
    const TransportPlan plan = sinkhorn_solve(problem);
    out.expect(plan.marginal_residual < 1e-6,
               "instance " + std::to_string(inst) + " residual " +
                   fmt(plan.marginal_residual));

    const HardAssignment rounded = round_plan_balanced(plan, cost, w);
    double best = 0.0;
    bool first = true;
    for (const auto& counts : fair_count_vectors(n, w)) {
      const double c = exact_assignment_oracle(cost, n, k, counts).total_cost;
      if (first || c < best) best = c;
      first = false;
    }
    out.expect(std::fabs(rounded.total_cost - best) <= 1e-9,
               "instance " + std::to_string(inst) + " n=" + std::to_string(n) +
                   ": rounded " + fmt(rounded.total_cost) + " vs optimum " +
                   fmt(best));
  }
  return out;
}

// ---------------------------------------------------------------- 6 ----
// Gate invariants: rows sum to one, the error stream acts with a one-step
// lag, and a zeroed gate head allocates 1/k to every actor.

Outcome check_allocation_invariants() {
  Outcome out;
  const std::size_t in_dim = 7;
  const std::size_t steps = 64;

  for (std::size_t k : {2, 3, 5}) {
    MixtureNets nets = MixtureNets::create(k, in_dim, 6, 5, 6);
    Rng init(Rng::derive(90 + k, rng_role::kInit));
    nets.store.init_uniform(init);

    Rng rng(1000 + k);
    std::vector<double> features(steps * in_dim);
    for (auto& f : features) f = rng.uniform(-1.5, 1.5);
    std::vector<double> lagged(steps * k, 0.0);
    std::vector<double> noise(steps * k);
    for (auto& g : noise) g = rng.uniform(-1.0, 1.0);

    const std::vector<double> q =
        allocate(nets, features, lagged, noise, steps, 1.0);
    for (std::size_t t = 0; t < steps; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += q[t * k + j];
      out.expect(std::fabs(s - 1.0) < 1e-6,
                 "k=" + std::to_string(k) + " row " + std::to_string(t) +
                     " sums to " + fmt(s));
    }

    // sentinel: a raw error at step t sits in lagged row t+1, so weights
    // through t must be untouched and the row after must move
    const std::size_t hit = steps / 2;
    std::vector<double> poked = lagged;
    for (std::size_t j = 0; j < k; ++j)
      poked[(hit + 1) * k + j] = (j % 2 == 0) ? 2.0 : -2.0;
    const std::vector<double> q2 =
        allocate(nets, features, poked, noise, steps, 1.0);
    for (std::size_t t = 0; t <= hit; ++t)
      for (std::size_t j = 0; j < k; ++j)
        out.expect(q2[t * k + j] == q[t * k + j],
                   "k=" + std::to_string(k) +
                       ": weight moved before the lag at t=" +
                       std::to_string(t));
    double moved = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      moved += std::fabs(q2[(hit + 1) * k + j] - q[(hit + 1) * k + j]);
    out.expect(moved > 0.0, "k=" + std::to_string(k) +
                                ": error row never reached the gate");

    // symmetry: a zeroed final layer scores every actor identically
    std::fill(nets.store.values(nets.alloc_fc.w).begin(),
              nets.store.values(nets.alloc_fc.w).end(), 0.0);
    std::fill(nets.store.values(nets.alloc_fc.b).begin(),
              nets.store.values(nets.alloc_fc.b).end(), 0.0);
    const std::vector<double> uniform =
        allocate(nets, features, lagged, std::vector<double>(), steps, 1.0);
    for (std::size_t i = 0; i < uniform.size(); ++i)
      out.expect(uniform[i] == 1.0 / static_cast<double>(k),
                 "k=" + std::to_string(k) + " uniform gate entry " +
                     fmt(uniform[i]));
  }
  return out;
}

// ---------------------------------------------------------------- 7 ----
// Supervised warm start: held-out agreement with the expert >= 90%, and
// after the first on-buffer policy update at least 90% of the sample
// ratios stay inside the clip band. Medians over 6 seeds.

Outcome check_pretrain_alignment() {
  Outcome out;

  // gentle drift: the expert stays long while held-out prices remain
  // inside the range the feature scaler was fit on
  const std::vector<RegimeSpec> regimes = {
      {Regime::kMomentum, 1e-4, 8e-4, 0.0, 3000},
  };
  const std::vector<Bar> bars = generate_synthetic(regimes, 424242, 100.0);
  const IndicatorSeries indicators =
      compute_indicators(bars, default_indicators());

  DualThrustParams expert;
  expert.k1 = 0.7;  // wide breakout bands: the gentle drift keeps the
  expert.k2 = 0.7;  // signal from whipsawing on noise
  EnvConfig env_cfg;
  env_cfg.slippage = 0.0;
  PpoConfig ppo;  // defaults: clip 0.2, 4 epochs, lr 3e-4

  const SplitIndices split = compute_split(bars, indicators, expert, 0.8);
  const std::vector<int> expert_sig =
      dual_thrust_series(bars, expert, split.warm_up, split.series_end);
  FeatureBuilder builder{
      fit_market_scaler(bars, indicators, split.warm_up, split.train_end),
      env_cfg};
  const std::size_t in_dim = builder.dim();
  const std::size_t hidden = 8;

  std::vector<double> agreements;
  std::vector<double> ratio_fracs;

  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    ActorCritic nets = ActorCritic::create(in_dim, hidden, 8);
    Rng init(Rng::derive(seed, rng_role::kInit));
    nets.store.init_uniform(init);
    Rng shuffle(Rng::derive(seed, rng_role::kShuffle));

    TradingEnv train_env(bars, indicators, env_cfg, split.warm_up,
                         split.train_end);
    std::vector<int> train_actions(
        expert_sig.begin(), expert_sig.begin() + split.train_steps());
    DemonstrationBuffer demo =
        fill_demo_buffer(train_env, builder, train_actions);

    std::vector<PolicyNet> solo{nets.actor};
    pretrain_actors(nets.store, solo, demo.data.features,
                    demo.data.action_index, in_dim, ppo, 3e-3, 40, shuffle);

    // held-out agreement, teacher-forced: the expert drives the account
    // while the actor is asked for its own action at every bar
    TradingEnv test_env(bars, indicators, env_cfg, split.train_end,
                        split.series_end);
    std::vector<double> h(hidden, 0.0);
    std::vector<double> feat(in_dim), rep(8), logits(2);
    NnWork work;
    std::size_t agree = 0, total = 0;
    while (!test_env.done()) {
      const std::size_t t = test_env.cursor();
      builder.build(test_env.observation(), feat.data());
      gru_step_infer(nets.store, nets.actor.enc, feat.data(), 1, h.data(),
                     work);
      linear_infer(nets.store, nets.actor.l1, h.data(), 1, rep.data(), work);
      for (auto& r : rep) r = std::tanh(r);
      linear_infer(nets.store, nets.actor.l2, rep.data(), 1, logits.data(),
                   work);
      const int expert_action = expert_sig[t - split.warm_up];
      if ((logits[0] >= logits[1] ? 1 : -1) == expert_action) ++agree;
      ++total;
      test_env.step(expert_action);
    }
    agreements.push_back(static_cast<double>(agree) /
                         static_cast<double>(total));

    // one on-buffer update from the warm start; ratios stay clippable
    refresh_caches(demo.data, nets, ppo);
    const std::vector<double> before = demo.data.old_log_probs;
    ppo_update(demo.data, nets, ppo, shuffle, ppo.epochs);
    RolloutBuffer after = demo.data;
    refresh_caches(after, nets, ppo);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      const double ratio = std::exp(after.old_log_probs[i] - before[i]);
      if (ratio >= 1.0 - ppo.eps_clip && ratio <= 1.0 + ppo.eps_clip)
        ++inside;
    }
    ratio_fracs.push_back(static_cast<double>(inside) /
                          static_cast<double>(before.size()));
  }

  const double med_agree = median_of(agreements);
  const double med_ratio = median_of(ratio_fracs);
  out.expect(med_agree >= 0.90,
             "median held-out agreement " + fmt(med_agree));
  out.expect(med_ratio >= 0.90,
             "median in-band ratio fraction " + fmt(med_ratio));
  if (out.pass)
    out.detail = "agreement " + fmt(med_agree) + ", in-band " +
                 fmt(med_ratio);
  return out;
}

// ---------------------------------------------------------------- 8 ----
// Directional claim on a 20k-bar alternating momentum/reversion series:
// median held-out annualized return over 6 seeds of the full two-actor
// trainer beats both the single-actor and the no-alignment variants.

Outcome check_mixture_ablation() {
  Outcome out;

  std::vector<RegimeSpec> regimes;
  for (int seg = 0; seg < 20; ++seg) {
    if (seg % 2 == 0) {
      const double drift = (seg % 4 == 0) ? 9e-4 : -9e-4;
      regimes.push_back({Regime::kMomentum, drift, 2e-3, 0.0, 1000});
    } else {
      regimes.push_back({Regime::kMeanReversion, 0.0, 4e-3, 0.08, 1000});
    }
  }
  const std::vector<Bar> bars = generate_synthetic(regimes, 777, 100.0);
  const IndicatorSeries indicators =
      compute_indicators(bars, default_indicators());

  TrainConfig base;
  base.pretrain_epochs = 8;
  base.imitation_epochs = 16;
  base.ppo_rounds = 40;
  base.hidden_dim = 16;
  base.rep_dim = 12;
  base.alloc_hidden = 16;
  base.env.slippage = 0.0;

  std::map<std::string, std::vector<double>> arr;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    for (const std::string& variant : {"full", "single", "no_alignment"}) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      if (variant == "single") cfg.mixture.actor_count = 1;
      if (variant == "no_alignment") cfg.mixture.lambda_ot = 0.0;

      const MixtureTrainResult res = train_mixture(cfg, bars);
      MixturePolicy policy(res.nets, res.builder, cfg.mixture.tau, bars);
      const BacktestReport rep =
          run_policy(policy, bars, indicators, cfg.env, res.split.train_end,
                     res.split.series_end);
      arr[variant].push_back(rep.metrics.arr);
      std::cout << "        seed " << seed << " " << variant << " arr "
                << fmt(rep.metrics.arr) << " trades " << rep.trade_count
                << "\n";
    }
  }

  const double full = median_of(arr["full"]);
  const double single = median_of(arr["single"]);
  const double no_align = median_of(arr["no_alignment"]);
  out.expect(full > single, "two actors " + fmt(full) +
                                " not above one actor " + fmt(single));
  out.expect(full > no_align, "with alignment " + fmt(full) +
                                  " not above without " + fmt(no_align));
  out.detail = "medians: full " + fmt(full) + ", single " + fmt(single) +
               ", no-alignment " + fmt(no_align);
  return out;
}

// ---------------------------------------------------------------- 9 ----
// A one-actor mixture with alignment and the similarity penalty switched
// off must walk the exact trajectory of the plain path: every diagnostic
// line byte-identical, every shared parameter bit-identical.

Outcome check_single_actor_parity() {
  Outcome out;

  const std::vector<RegimeSpec> regimes = {
      {Regime::kMomentum, 5e-4, 3e-3, 0.0, 600},
      {Regime::kMeanReversion, 0.0, 4e-3, 0.06, 600},
  };
  const std::vector<Bar> bars = generate_synthetic(regimes, 31, 100.0);

  TrainConfig cfg;
  cfg.seed = 5;
  cfg.pretrain_epochs = 3;
  cfg.imitation_epochs = 3;
  cfg.ppo_rounds = 8;
  cfg.hidden_dim = 8;
  cfg.rep_dim = 6;
  cfg.alloc_hidden = 8;
  cfg.env.slippage = 0.0;
  cfg.ppo.batch = 64;
  cfg.ppo.bptt_window = 16;
  cfg.ppo.epochs = 2;
  cfg.mixture.actor_count = 1;
  cfg.mixture.lambda_ot = 0.0;
  cfg.mixture.use_disentangle = false;

  const MixtureTrainResult mixed = train_mixture(cfg, bars);
  const PlainTrainResult plain = train_plain(cfg, bars);

  out.expect(mixed.log.size() == plain.log.size(),
             "line counts " + std::to_string(mixed.log.size()) + " vs " +
                 std::to_string(plain.log.size()));
  for (std::size_t i = 0; i < mixed.log.size() && out.pass; ++i)
    out.expect(mixed.log[i] == plain.log[i],
               "line " + std::to_string(i) + " differs:\n  " + mixed.log[i] +
                   "\n  " + plain.log[i]);

  const ParamStore& ms = mixed.nets.store;
  const ParamStore& ps = plain.nets.store;
  out.expect(ps.count() < ms.count(), "store layout unexpected");
  for (std::size_t id = 0; id < ps.count() && out.pass; ++id) {
    const int i = static_cast<int>(id);
    out.expect(ms.rows(i) == ps.rows(i) && ms.cols(i) == ps.cols(i),
               "entry shape mismatch at " + std::to_string(id));
    const auto& a = ms.values(i);
    const auto& b = ps.values(i);
    out.expect(a.size() == b.size() &&
                   std::memcmp(a.data(), b.data(),
                               a.size() * sizeof(double)) == 0,
               "parameter " + ps.name(i) + " differs");
  }
  if (out.pass)
    out.detail = std::to_string(mixed.log.size()) + " lines, " +
                 std::to_string(ps.count()) + " parameter blocks";
  return out;
}

// --------------------------------------------------------------- 10 ----
// Metric fixtures with hand-computed answers, held exactly.

Outcome check_metrics_fixtures() {
  Outcome out;

  // worked fixture: peak 120, trough 90 -> relative drawdown 30/120
  {
    const std::vector<double> equity = {100.0, 120.0, 90.0, 110.0};
    const std::vector<double> profits = {20.0, -30.0, 20.0};
    const PerformanceMetrics m = compute_metrics(profits, equity, 60480.0);
    out.expect(m.mdd == 0.25, "drawdown " + fmt(m.mdd) + " != 0.25");
  }

  // monotone equity never draws down
  {
    const std::vector<double> equity = {100.0, 105.0, 111.0, 118.0};
    const std::vector<double> profits = {5.0, 6.0, 7.0};
    const PerformanceMetrics m = compute_metrics(profits, equity, 60480.0);
    out.expect(m.mdd == 0.0, "monotone drawdown " + fmt(m.mdd));
  }

  // antisymmetry: at zero costs a short mirrors a long exactly
  {
    std::vector<Bar> bars;
    Rng rng(606);
    double close = 100.0;
    for (int i = 0; i < 80; ++i) {
      close += rng.uniform(-0.4, 0.4);
      Bar b;
      b.timestamp = 60 * (i + 1);
      b.open = close - 0.1;
      b.high = close + 0.2;
      b.low = close - 0.2;
      b.close = close;
      b.volume = 1000.0;
      b.value = close * 1000.0;
      bars.push_back(b);
    }
    const IndicatorSeries ind = compute_indicators(bars, default_indicators());
    EnvConfig cfg;
    cfg.fee_rate = 0.0;
    cfg.slippage = 0.0;
    HoldPolicy long_hold(1), short_hold(-1);
    const std::size_t start = std::max<std::size_t>(ind.first_valid, 1);
    const BacktestReport lo =
        run_policy(long_hold, bars, ind, cfg, start, bars.size());
    const BacktestReport sh =
        run_policy(short_hold, bars, ind, cfg, start, bars.size());
    out.expect(lo.profits.size() == sh.profits.size(), "length mismatch");
    for (std::size_t i = 0; i < lo.profits.size() && out.pass; ++i)
      out.expect(lo.profits[i] == -sh.profits[i],
                 "profit step " + std::to_string(i) + " not mirrored");
    out.expect(std::fabs(lo.metrics.arr + sh.metrics.arr) < 1e-9,
               "annualized returns not opposite: " + fmt(lo.metrics.arr) +
                   " vs " + fmt(sh.metrics.arr));
  }
  return out;
}

// --------------------------------------------------------------- 11 ----
// Repeating a command with the same inputs reproduces every artifact
// byte for byte.

Outcome check_rerun_determinism() {
  Outcome out;
  namespace fs = std::filesystem;
  const std::string root = "acceptance_scratch";
  fs::remove_all(root);
  fs::create_directories(root);

  auto run_quiet = [](const std::vector<std::string>& args) {
    std::ostringstream sink;
    std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
    const int rc = run_cli(args);
    std::cout.rdbuf(old);
    return rc;
  };
  auto write_file = [](const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
  };

  write_file(root + "/gen.cfg",
             "gen_regimes = momentum:0.0006:0.003:0.0:500;"
             "reversion:0.0:0.004:0.06:400\n"
             "gen_p0 = 100.0\nseed = 13\n");
  write_file(root + "/train.cfg",
             "seed = 21\npretrain_epochs = 2\nimitation_epochs = 2\n"
             "ppo_rounds = 4\npretrain_lr = 0.01\nhidden_dim = 6\n"
             "rep_dim = 5\nalloc_hidden = 6\nbptt_window = 16\nbatch = 64\n"
             "epochs = 2\nlr = 0.003\nactors = 2\not_max_iters = 300\n"
             "slippage = 0.0\n");

  if (run_quiet({"generate", "--config", root + "/gen.cfg", "--out",
                 root + "/d1"}) != 0 ||
      run_quiet({"generate", "--config", root + "/gen.cfg", "--out",
                 root + "/d2"}) != 0) {
    out.fail("generate returned nonzero");
    return out;
  }
  out.expect(fnv1a64_file(root + "/d1/data.csv") ==
                 fnv1a64_file(root + "/d2/data.csv"),
             "generated series differ across runs");

  const std::string data = root + "/d1/data.csv";
  const std::vector<std::string> train_cmd = {
      "train", "--config", root + "/train.cfg", "--data", data,
      "--out", root + "/t"};
  if (run_quiet(train_cmd) != 0) {
    out.fail("first train returned nonzero");
    return out;
  }
  std::map<std::string, std::uint64_t> first;
  for (const char* f : {"checkpoint.json", "diagnostics.jsonl",
                        "alloc_weights.csv", "manifest.json"})
    first[f] = fnv1a64_file(root + "/t/" + f);
  if (run_quiet(train_cmd) != 0) {
    out.fail("second train returned nonzero");
    return out;
  }
  for (const auto& [f, h] : first)
    out.expect(fnv1a64_file(root + "/t/" + f) == h, f + " changed on rerun");

  const std::vector<std::string> bt_cmd = {
      "backtest", "--config", root + "/train.cfg", "--data", data,
      "--checkpoint", root + "/t/checkpoint.json", "--out", root + "/b"};
  if (run_quiet(bt_cmd) != 0) {
    out.fail("first backtest returned nonzero");
    return out;
  }
  const std::uint64_t cmp0 = fnv1a64_file(root + "/b/comparison.csv");
  const std::uint64_t mix0 = fnv1a64_file(root + "/b/mixture_report.json");
  if (run_quiet(bt_cmd) != 0) {
    out.fail("second backtest returned nonzero");
    return out;
  }
  out.expect(fnv1a64_file(root + "/b/comparison.csv") == cmp0,
             "comparison.csv changed on rerun");
  out.expect(fnv1a64_file(root + "/b/mixture_report.json") == mix0,
             "mixture_report.json changed on rerun");

  fs::remove_all(root);
  return out;
}

// ------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 = report the time, enforce nothing
  Outcome (*fn)();
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "transition-table", 1.0, check_transition_table},
      {2, "dsr-incremental-vs-refold", 5.0, check_dsr_stream},
      {3, "gradient-suite", 60.0, check_gradient_suite},
      {4, "gae-oracle", 5.0, check_gae_oracle},
      {5, "transport-vs-enumeration", 30.0, check_transport_vs_enumeration},
      {6, "allocation-invariants", 5.0, check_allocation_invariants},
      {7, "pretrain-alignment", 600.0, check_pretrain_alignment},
      {8, "mixture-ablation", 0.0, check_mixture_ablation},
      {9, "single-actor-parity", 300.0, check_single_actor_parity},
      {10, "metrics-fixtures", 1.0, check_metrics_fixtures},
      {11, "rerun-determinism", 600.0, check_rerun_determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance_tests [--only N]\n";
      return 64;
    }
  }

  int failures = 0;
  for (const Criterion& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome res;
    try {
      res = c.fn();
    } catch (const std::exception& e) {
      res.pass = false;
      res.detail = std::string("threw: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (res.pass && c.budget_seconds > 0.0 && elapsed > c.budget_seconds)
      res.fail("over time budget (" + fmt(elapsed) + "s > " +
               fmt(c.budget_seconds) + "s)");

    char head[64];
    std::snprintf(head, sizeof(head), "[%s] %02d %s (%.1fs)",
                  res.pass ? "PASS" : "FAIL", c.id, c.name, elapsed);
    std::cout << head;
    if (!res.detail.empty()) std::cout << " -- " << res.detail;
    std::cout << "\n" << std::flush;
    if (!res.pass) ++failures;
  }
  return failures;
}
