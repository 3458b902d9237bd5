#include "mixtrade/env.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "mixtrade/data.hpp"
#include "mixtrade/errors.hpp"
#include "oracles/recursions.hpp"

using namespace mixtrade;

namespace {

EnvConfig default_cfg() { return EnvConfig{}; }

// Deterministic bar fixture with indicators, long enough past warm-up.
struct Fixture {
  std::vector<Bar> bars;
  IndicatorSeries ind;

  explicit Fixture(std::size_t n, std::uint64_t seed = 5) {
    std::vector<RegimeSpec> specs{{Regime::kMomentum, 0.0002, 0.003, 0.0, n}};
    bars = generate_synthetic(specs, seed, 100.0);
    ind = compute_indicators(bars, default_indicators());
  }
};

}  // namespace

TEST_CASE("apply_action covers the full transition table") {
  // All six (position, action) rows: new position equals the action and
  // delta is the signed contract change.
  struct Row {
    int position, action, new_position, delta;
  };
  const Row rows[] = {
      {0, 1, 1, 1},   {0, -1, -1, -1}, {1, 1, 1, 0},
      {1, -1, -1, -2}, {-1, 1, 1, 2},  {-1, -1, -1, 0},
  };
  for (const Row& r : rows) {
    auto got = apply_action(r.position, r.action);
    CHECK(got.new_position == r.new_position);
    CHECK(got.delta_po == r.delta);
  }
  CHECK_THROWS_AS(apply_action(2, 1), StateError);
  CHECK_THROWS_AS(apply_action(0, 0), StateError);
  CHECK_THROWS_AS(apply_action(0, 2), StateError);
}

TEST_CASE("compute_profit worked example") {
  EnvConfig cfg = default_cfg();  // slippage 0.2, fee 2.3e-5
  // Long into a +1 move while flipping from short to long: price gain of
  // 1 minus 0.4 round-trip slippage minus the fee on two contracts at the
  // new price.
  const double got = compute_profit(100.0, 101.0, 1, 2, cfg);
  CHECK(got == doctest::Approx(0.595354).epsilon(1e-9));

  // Flat position pays only the fee.
  CHECK(compute_profit(100.0, 101.0, 0, 1, cfg) ==
        doctest::Approx(-2.3e-5 * 101.0).epsilon(1e-12));

  // Short position gains on a fall (and the literal slippage term adds
  // +2s for a short over one bar).
  CHECK(compute_profit(101.0, 100.0, -1, 0, cfg) ==
        doctest::Approx((100.0 - 101.0 - 0.4) * -1.0).epsilon(1e-12));

  CHECK_THROWS_AS(compute_profit(0.0, 100.0, 1, 0, cfg), DataError);
  CHECK_THROWS_AS(compute_profit(100.0, -1.0, 1, 0, cfg), DataError);
}

TEST_CASE("compute_dsr hand value and cold-start guard") {
  EnvConfig cfg = default_cfg();
  SUBCASE("worked value at A=0.5, B=0.5, r=1") {
    DsrState s{0.5, 0.5};
    auto got = compute_dsr(s, 1.0, cfg);
    // dA=0.5, dB=0.5, denom=0.25: (0.5*0.5 - 0.5*0.5*0.5)/0.25^1.5 = 1.
    CHECK(got.reward == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(got.next.a == doctest::Approx(0.5 + 0.01 * 0.5));
    CHECK(got.next.b == doctest::Approx(0.5 + 0.01 * 0.5));
  }
  SUBCASE("cold start returns zero but still updates moments") {
    DsrState s{};
    auto got = compute_dsr(s, 2.0, cfg);
    CHECK(got.reward == 0.0);
    CHECK(got.next.a == doctest::Approx(0.01 * 2.0));
    CHECK(got.next.b == doctest::Approx(0.01 * 4.0));
  }
  SUBCASE("guard boundary") {
    // denom = B - A^2 exactly at eps -> guarded; slightly above -> live.
    EnvConfig c2 = cfg;
    c2.dsr_eps = 1e-4;
    DsrState at{0.0, 1e-4};
    CHECK(compute_dsr(at, 1.0, c2).reward == 0.0);
    DsrState above{0.0, 2e-4};
    CHECK(compute_dsr(above, 1.0, c2).reward != 0.0);
  }
}

TEST_CASE("incremental DSR stream matches the from-scratch oracle") {
  EnvConfig cfg = default_cfg();
  std::vector<double> profits;
  std::uint64_t s = 2024;
  for (int i = 0; i < 1000; ++i) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    profits.push_back(static_cast<double>(static_cast<std::int64_t>(s >> 11)) *
                          0x1.0p-53 * 4.0 -
                      1.0);
  }
  auto expect = oracles::dsr_stream_from_scratch(profits, cfg.ema_decay,
                                                 cfg.dsr_eps);
  DsrState st{};
  for (std::size_t t = 0; t < profits.size(); ++t) {
    auto got = compute_dsr(st, profits[t], cfg);
    st = got.next;
    CHECK(got.reward == doctest::Approx(expect[t]).epsilon(1e-10));
  }
}

TEST_CASE("EnvConfig validation") {
  EnvConfig cfg = default_cfg();
  CHECK_NOTHROW(cfg.validate());
  EnvConfig bad = cfg;
  bad.fee_rate = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.margin_threshold = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.initial_capital = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.ema_decay = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.dsr_eps = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("TradingEnv rejects bad windows") {
  Fixture fx(200);
  EnvConfig cfg = default_cfg();
  CHECK_THROWS_AS(TradingEnv(fx.bars, fx.ind, cfg, 10, 100),
                  StateError);  // inside warm-up (first valid 33)
  CHECK_THROWS_AS(TradingEnv(fx.bars, fx.ind, cfg, 0, 100), StateError);
  CHECK_THROWS_AS(TradingEnv(fx.bars, fx.ind, cfg, 50, 50), StateError);
  CHECK_THROWS_AS(TradingEnv(fx.bars, fx.ind, cfg, 50, 1000), StateError);
  auto empty_ind = compute_indicators(fx.bars, {});
  CHECK_NOTHROW(TradingEnv(fx.bars, empty_ind, cfg, 1, 100));

  auto short_ind = compute_indicators(
      std::vector<Bar>(fx.bars.begin(), fx.bars.begin() + 100),
      default_indicators());
  CHECK_THROWS_AS(TradingEnv(fx.bars, short_ind, cfg, 40, 100), StateError);
}

TEST_CASE("TradingEnv first step books only the entry fee") {
  Fixture fx(200);
  EnvConfig cfg = default_cfg();
  TradingEnv env(fx.bars, fx.ind, cfg, 40, 120);
  CHECK(env.cursor() == 40);
  CHECK(env.equity() == cfg.initial_capital);
  CHECK(env.max_steps() == 80);

  auto tr = env.step(1);
  // Held position was flat, so the price move and slippage do not apply;
  // only the fee on the one-contract entry at the current close.
  CHECK(tr.t == 40);
  CHECK(tr.action == 1);
  CHECK(tr.position == 1);
  CHECK(tr.profit ==
        doctest::Approx(-cfg.fee_rate * fx.bars[40].close).epsilon(1e-12));
  CHECK(tr.reward == 0.0);  // DSR cold start
  CHECK(tr.equity == doctest::Approx(cfg.initial_capital + tr.profit));
  CHECK_FALSE(tr.done);
  CHECK(env.cursor() == 41);
}

TEST_CASE("TradingEnv equity is the running profit sum") {
  Fixture fx(300);
  EnvConfig cfg = default_cfg();
  TradingEnv env(fx.bars, fx.ind, cfg, 40, 200);
  double equity = cfg.initial_capital;
  int held = 0;
  std::size_t t = 40;
  std::uint64_t s = 99;
  while (!env.done()) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    const int action = (s >> 40) % 2 == 0 ? 1 : -1;
    auto tr = env.step(action);
    // Shadow the profit computation with the same primitive calls.
    const double profit = compute_profit(fx.bars[t - 1].close,
                                         fx.bars[t].close, held,
                                         action - held, cfg);
    equity += profit;
    CHECK(tr.profit == profit);  // identical call, identical bits
    CHECK(tr.equity == equity);
    held = action;
    ++t;
  }
  CHECK(env.termination() == Termination::kSeriesEnd);
  CHECK(env.cursor() == 199);  // cursor parks on the final acted bar
  CHECK_THROWS_AS(env.step(1), StateError);
}

TEST_CASE("TradingEnv DSR rewards match the oracle along a rollout") {
  Fixture fx(300);
  EnvConfig cfg = default_cfg();
  TradingEnv env(fx.bars, fx.ind, cfg, 40, 240);
  std::vector<double> profits, rewards;
  int a = 1;
  while (!env.done()) {
    auto tr = env.step(a);
    profits.push_back(tr.profit);
    rewards.push_back(tr.reward);
    a = -a;  // alternate to exercise the fee path
  }
  auto expect = oracles::dsr_stream_from_scratch(profits, cfg.ema_decay,
                                                 cfg.dsr_eps);
  REQUIRE(expect.size() == rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i)
    CHECK(rewards[i] == doctest::Approx(expect[i]).epsilon(1e-10));
}

TEST_CASE("TradingEnv margin breach terminates the episode") {
  Fixture fx(200);
  EnvConfig cfg = default_cfg();
  cfg.initial_capital = 10.0;
  cfg.slippage = 2.0;  // every held bar loses about 4 of 10 capital
  TradingEnv env(fx.bars, fx.ind, cfg, 40, 150);
  auto tr1 = env.step(1);  // entry: fee only
  CHECK_FALSE(tr1.done);
  auto tr2 = env.step(1);  // held long: price move minus 4
  CHECK(tr2.done);
  CHECK(tr2.equity < cfg.margin_threshold * cfg.initial_capital);
  CHECK(env.termination() == Termination::kMarginBreach);
  CHECK_THROWS_AS(env.step(1), StateError);

  env.reset();
  CHECK_FALSE(env.done());
  CHECK(env.equity() == cfg.initial_capital);
  CHECK(env.cursor() == 40);
  CHECK(env.termination() == Termination::kNone);
}

TEST_CASE("market features are independent of the action stream") {
  Fixture fx(260);
  EnvConfig cfg = default_cfg();
  TradingEnv a(fx.bars, fx.ind, cfg, 40, 200);
  TradingEnv b(fx.bars, fx.ind, cfg, 40, 200);
  std::uint64_t s = 7;
  bool account_diverged = false;
  while (!a.done() && !b.done()) {
    const auto& oa = a.observation();
    const auto& ob = b.observation();
    CHECK(oa.market.price_block == ob.market.price_block);
    CHECK(oa.market.indicators == ob.market.indicators);
    if (oa.account.cash != ob.account.cash) account_diverged = true;
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    const int ra = (s >> 33) % 2 == 0 ? 1 : -1;
    a.step(ra);
    b.step(-ra);  // opposite stream
  }
  CHECK(account_diverged);  // account block does react to actions
}

TEST_CASE("state_features layout and account normalization") {
  Fixture fx(120);
  EnvConfig cfg = default_cfg();
  TradingEnv env(fx.bars, fx.ind, cfg, 40, 100);
  const std::size_t k = fx.ind.names.size();
  REQUIRE(feature_dim(k) == 6 + k + 4);
  std::vector<double> feat(feature_dim(k));
  state_features(env.observation(), cfg, feat.data());
  CHECK(feat[0] == fx.bars[40].open);
  CHECK(feat[3] == fx.bars[40].close);
  CHECK(feat[6] == fx.ind.at(40, 0));
  CHECK(feat[6 + k] == 0.0);      // flat position
  CHECK(feat[6 + k + 1] == 0.0);  // cash at par
  CHECK(feat[6 + k + 2] ==
        doctest::Approx(1.0 / cfg.margin_threshold - 1.0));
  CHECK(feat[6 + k + 3] == 0.0);  // no return yet

  env.step(-1);
  state_features(env.observation(), cfg, feat.data());
  CHECK(feat[6 + k] == -1.0);
  CHECK(feat[0] == fx.bars[41].open);
}

TEST_CASE("FeatureBuilder standardizes market dims and passes account") {
  Fixture fx(300);
  EnvConfig cfg = default_cfg();
  auto scaler = fit_market_scaler(fx.bars, fx.ind, 40, 240);
  FeatureBuilder fb{scaler, cfg};
  const std::size_t k = fx.ind.names.size();
  REQUIRE(fb.market_dim() == 6 + k);
  REQUIRE(fb.dim() == feature_dim(k));

  TradingEnv env(fx.bars, fx.ind, cfg, 40, 240);
  std::vector<double> mean(fb.market_dim(), 0.0);
  std::vector<double> var(fb.market_dim(), 0.0);
  std::vector<double> feat(fb.dim());
  std::size_t n = 0;
  while (!env.done()) {
    fb.build(env.observation(), feat.data());
    for (std::size_t j = 0; j < fb.market_dim(); ++j) mean[j] += feat[j];
    ++n;
    // Account block is the raw normalized account state.
    CHECK(feat[fb.market_dim()] ==
          static_cast<double>(env.observation().account.position));
    env.step(1);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  TradingEnv env2(fx.bars, fx.ind, cfg, 40, 240);
  while (!env2.done()) {
    fb.build(env2.observation(), feat.data());
    for (std::size_t j = 0; j < fb.market_dim(); ++j)
      var[j] += (feat[j] - mean[j]) * (feat[j] - mean[j]);
    env2.step(1);
  }
  for (std::size_t j = 0; j < fb.market_dim(); ++j) {
    // The env observes exactly the bars the scaler was fit on, so the
    // standardized moments recover 0/1 up to accumulation rounding.
    CHECK(std::fabs(mean[j]) < 1e-8);
    CHECK(var[j] / static_cast<double>(n) ==
          doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("fit_market_scaler rejects bad windows") {
  Fixture fx(100);
  CHECK_THROWS_AS(fit_market_scaler(fx.bars, fx.ind, 50, 50), StateError);
  CHECK_THROWS_AS(fit_market_scaler(fx.bars, fx.ind, 50, 200), StateError);
}

TEST_CASE("termination_name spells the enum") {
  CHECK(termination_name(Termination::kNone) == "None");
  CHECK(termination_name(Termination::kSeriesEnd) == "SeriesEnd");
  CHECK(termination_name(Termination::kMarginBreach) == "MarginBreach");
}
