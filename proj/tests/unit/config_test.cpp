#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mixtrade/config.hpp"
#include "mixtrade/errors.hpp"

using namespace mixtrade;

namespace {

KeyValueConfig parse(const std::string& text) {
  return KeyValueConfig::from_string(text);
}

}  // namespace

TEST_CASE("config parses key=value lines with comments and blanks") {
  const KeyValueConfig cfg = parse(
      "# leading comment\n"
      "seed = 42\n"
      "\n"
      "  lr=0.25   # trailing comment\n"
      "tau =2.0\n");
  CHECK(cfg.entries().size() == 3);
  CHECK(cfg.has("seed"));
  CHECK(cfg.get_u64("seed", 0) == 42);
  CHECK(cfg.get_double("lr", 0.0) == 0.25);
  CHECK(cfg.get_double("tau", 0.0) == 2.0);
  CHECK_FALSE(cfg.has("gamma"));
  CHECK(cfg.get_double("gamma", 0.5) == 0.5);  // fallback untouched
}

TEST_CASE("config rejects malformed lines") {
  CHECK_THROWS_AS(parse("just words\n"), ConfigError);
  CHECK_THROWS_AS(parse("= 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed = 1\nseed = 2\n"), ConfigError);
  // a comment-only line is fine even with junk behind the hash
  CHECK_NOTHROW(parse("# a = b = c ???\n"));
}

TEST_CASE("config typed getters validate their values") {
  const KeyValueConfig cfg = parse(
      "lr = fast\n"
      "epochs = 3x\n"
      "batch = -4\n"
      "pretrain = maybe\n");
  CHECK_THROWS_AS(cfg.get_double("lr", 0.0), ConfigError);
  CHECK_THROWS_AS(cfg.get_size("epochs", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_size("batch", 0), ConfigError);  // no wrap-around
  CHECK_THROWS_AS(cfg.get_bool("pretrain", true), ConfigError);
}

TEST_CASE("config bool accepts the documented spellings") {
  const KeyValueConfig cfg = parse(
      "a = true\nb = 1\nc = YES\nd = on\n"
      "e = false\nf = 0\ng = No\nh = OFF\n");
  for (const char* key : {"a", "b", "c", "d"})
    CHECK(cfg.get_bool(key, false));
  for (const char* key : {"e", "f", "g", "h"})
    CHECK_FALSE(cfg.get_bool(key, true));
}

TEST_CASE("config unknown keys are rejected, known keys pass") {
  CHECK_THROWS_WITH_AS(parse("sede = 1\n").reject_unknown_keys(),
                       "config: unknown key 'sede'", ConfigError);
  std::string all;
  for (const std::string& key : known_config_keys()) all += key + " = x\n";
  CHECK_NOTHROW(parse(all).reject_unknown_keys());
}

TEST_CASE("train config keeps defaults and applies overrides") {
  const TrainConfig dflt;

  SUBCASE("empty config reproduces the defaults") {
    const TrainConfig got = train_config_from(parse(""));
    CHECK(got.seed == dflt.seed);
    CHECK(got.pretrain == dflt.pretrain);
    CHECK(got.pretrain_epochs == dflt.pretrain_epochs);
    CHECK(got.train_split == dflt.train_split);
    CHECK(got.hidden_dim == dflt.hidden_dim);
    CHECK(got.env.fee_rate == dflt.env.fee_rate);
    CHECK(got.env.initial_capital == dflt.env.initial_capital);
    CHECK(got.ppo.gamma == dflt.ppo.gamma);
    CHECK(got.ppo.batch == dflt.ppo.batch);
    CHECK(got.mixture.actor_count == dflt.mixture.actor_count);
    CHECK(got.mixture.lambda_ot == dflt.mixture.lambda_ot);
    CHECK(got.expert.lookback == dflt.expert.lookback);
  }

  SUBCASE("each section takes its override") {
    const TrainConfig got = train_config_from(parse(
        "seed = 9\n"
        "pretrain = false\n"
        "train_split = 0.6\n"
        "fee_rate = 0.002\n"
        "gamma = 0.9\n"
        "batch = 64\n"
        "actors = 5\n"
        "lambda_ot = 0.0\n"
        "use_disentangle = false\n"
        "dt_lookback = 7\n"
        "dt_k1 = 0.3\n"));
    CHECK(got.seed == 9);
    CHECK_FALSE(got.pretrain);
    CHECK(got.train_split == 0.6);
    CHECK(got.env.fee_rate == 0.002);
    CHECK(got.ppo.gamma == 0.9);
    CHECK(got.ppo.batch == 64);
    CHECK(got.mixture.actor_count == 5);
    CHECK(got.mixture.lambda_ot == 0.0);
    CHECK_FALSE(got.mixture.use_disentangle);
    CHECK(got.expert.lookback == 7);
    CHECK(got.expert.k1 == 0.3);
    // untouched neighbours keep their defaults
    CHECK(got.env.slippage == dflt.env.slippage);
    CHECK(got.ppo.lambda_gae == dflt.ppo.lambda_gae);
    CHECK(got.mixture.tau == dflt.mixture.tau);
    CHECK(got.expert.k2 == dflt.expert.k2);
  }

  SUBCASE("validation runs on the assembled config") {
    CHECK_THROWS_AS(train_config_from(parse("train_split = 1.5\n")),
                    ConfigError);
    CHECK_THROWS_AS(train_config_from(parse("gamma = 2.0\n")), ConfigError);
    CHECK_THROWS_AS(train_config_from(parse("actors = 0\n")), ConfigError);
    CHECK_THROWS_AS(train_config_from(parse("typo_key = 1\n")), ConfigError);
  }
}

TEST_CASE("regime specs parse kind, numbers and length") {
  const std::vector<RegimeSpec> specs = parse_regime_specs(
      "momentum:0.001:0.02:0.0:300; reversion:-0.0005:0.01:0.08:200;");
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].regime == Regime::kMomentum);
  CHECK(specs[0].drift == 0.001);
  CHECK(specs[0].noise_sigma == 0.02);
  CHECK(specs[0].reversion_strength == 0.0);
  CHECK(specs[0].length == 300);
  CHECK(specs[1].regime == Regime::kMeanReversion);
  CHECK(specs[1].drift == -0.0005);
  CHECK(specs[1].length == 200);

  CHECK_THROWS_AS(parse_regime_specs(""), ConfigError);
  CHECK_THROWS_AS(parse_regime_specs("drift:0.1:0.2:0.0:10"), ConfigError);
  CHECK_THROWS_AS(parse_regime_specs("momentum:0.1:0.2:10"), ConfigError);
  CHECK_THROWS_AS(parse_regime_specs("momentum:a:0.2:0.0:10"), ConfigError);
}

TEST_CASE("generate config needs regimes and a positive price") {
  const GenerateConfig gen = generate_config_from(parse(
      "gen_regimes = momentum:0.0:0.01:0.0:50\n"
      "gen_p0 = 25.0\n"
      "seed = 3\n"));
  CHECK(gen.regimes.size() == 1);
  CHECK(gen.p0 == 25.0);
  CHECK(gen.seed == 3);

  CHECK_THROWS_AS(generate_config_from(parse("gen_p0 = 25.0\n")), ConfigError);
  CHECK_THROWS_AS(generate_config_from(parse(
                      "gen_regimes = momentum:0.0:0.01:0.0:50\n"
                      "gen_p0 = 0.0\n")),
                  ConfigError);
}

TEST_CASE("periods per year defaults to one-minute bars") {
  CHECK(periods_per_year_from(parse("")) == 60480.0);  // 240 * 252
  CHECK(periods_per_year_from(parse("periods_per_year = 252\n")) == 252.0);
  CHECK_THROWS_AS(periods_per_year_from(parse("periods_per_year = 0\n")),
                  ConfigError);
}

TEST_CASE("config round trips through a file") {
  const std::string path = "config_test_roundtrip.cfg";
  {
    std::ofstream out(path);
    out << "seed = 77\nlr = 0.125\n";
  }
  const KeyValueConfig cfg = KeyValueConfig::from_file(path);
  CHECK(cfg.get_u64("seed", 0) == 77);
  CHECK(cfg.get_double("lr", 0.0) == 0.125);
  std::remove(path.c_str());

  CHECK_THROWS_AS(KeyValueConfig::from_file("no_such_config_file.cfg"),
                  ConfigError);
}
