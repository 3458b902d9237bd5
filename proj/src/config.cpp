#include "mixtrade/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "mixtrade/errors.hpp"

namespace mixtrade {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& raw) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(raw, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not a number: " + raw);
  }
  if (used != raw.size())
    throw ConfigError("config: key '" + key + "' has trailing text: " + raw);
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  // stoull would wrap "-3" into a huge value instead of failing
  if (raw.find('-') != std::string::npos)
    throw ConfigError("config: key '" + key +
                      "' is not a non-negative integer: " + raw);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(raw, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key +
                      "' is not a non-negative integer: " + raw);
  }
  if (used != raw.size())
    throw ConfigError("config: key '" + key + "' has trailing text: " + raw);
  return static_cast<std::uint64_t>(v);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " is not 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: empty key on line " +
                        std::to_string(line_no));
    if (cfg.kv_.count(key))
      throw ConfigError("config: duplicate key '" + key + "'");
    cfg.kv_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

bool KeyValueConfig::has(const std::string& key) const {
  return kv_.count(key) > 0;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key,
                                  double fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : parse_double(key, it->second);
}

std::size_t KeyValueConfig::get_size(const std::string& key,
                                     std::size_t fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback
                         : static_cast<std::size_t>(parse_u64(key, it->second));
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : parse_u64(key, it->second);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: key '" + key + "' is not a boolean: " +
                    it->second);
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      // trainer
      "seed", "pretrain", "pretrain_epochs", "imitation_epochs", "ppo_rounds",
      "pretrain_lr", "train_split", "hidden_dim", "rep_dim", "alloc_hidden",
      // env / costs
      "fee_rate", "slippage", "margin_threshold", "initial_capital",
      "ema_decay", "dsr_eps",
      // policy optimization
      "gamma", "lambda_gae", "eps_clip", "lr", "momentum", "epochs", "batch",
      "bptt_window", "value_coeff",
      // mixture and allocation
      "actors", "tau", "dis_weight", "lambda_ot", "ot_epsilon",
      "ot_max_iters", "ot_tol", "use_ot", "use_disentangle",
      // expert
      "dt_lookback", "dt_k1", "dt_k2",
      // backtest
      "periods_per_year",
      // synthetic data
      "gen_regimes", "gen_p0",
  };
  return keys;
}

void KeyValueConfig::reject_unknown_keys() const {
  const std::vector<std::string>& known = known_config_keys();
  for (const auto& [key, value] : kv_) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("config: unknown key '" + key + "'");
  }
}

TrainConfig train_config_from(const KeyValueConfig& cfg) {
  cfg.reject_unknown_keys();
  TrainConfig out;
  out.seed = cfg.get_u64("seed", out.seed);
  out.pretrain = cfg.get_bool("pretrain", out.pretrain);
  out.pretrain_epochs = cfg.get_size("pretrain_epochs", out.pretrain_epochs);
  out.imitation_epochs =
      cfg.get_size("imitation_epochs", out.imitation_epochs);
  out.ppo_rounds = cfg.get_size("ppo_rounds", out.ppo_rounds);
  out.pretrain_lr = cfg.get_double("pretrain_lr", out.pretrain_lr);
  out.train_split = cfg.get_double("train_split", out.train_split);
  out.hidden_dim = cfg.get_size("hidden_dim", out.hidden_dim);
  out.rep_dim = cfg.get_size("rep_dim", out.rep_dim);
  out.alloc_hidden = cfg.get_size("alloc_hidden", out.alloc_hidden);

  out.env.fee_rate = cfg.get_double("fee_rate", out.env.fee_rate);
  out.env.slippage = cfg.get_double("slippage", out.env.slippage);
  out.env.margin_threshold =
      cfg.get_double("margin_threshold", out.env.margin_threshold);
  out.env.initial_capital =
      cfg.get_double("initial_capital", out.env.initial_capital);
  out.env.ema_decay = cfg.get_double("ema_decay", out.env.ema_decay);
  out.env.dsr_eps = cfg.get_double("dsr_eps", out.env.dsr_eps);

  out.ppo.gamma = cfg.get_double("gamma", out.ppo.gamma);
  out.ppo.lambda_gae = cfg.get_double("lambda_gae", out.ppo.lambda_gae);
  out.ppo.eps_clip = cfg.get_double("eps_clip", out.ppo.eps_clip);
  out.ppo.lr = cfg.get_double("lr", out.ppo.lr);
  out.ppo.momentum = cfg.get_double("momentum", out.ppo.momentum);
  out.ppo.epochs = cfg.get_size("epochs", out.ppo.epochs);
  out.ppo.batch = cfg.get_size("batch", out.ppo.batch);
  out.ppo.bptt_window = cfg.get_size("bptt_window", out.ppo.bptt_window);
  out.ppo.value_coeff = cfg.get_double("value_coeff", out.ppo.value_coeff);

  out.mixture.actor_count = cfg.get_size("actors", out.mixture.actor_count);
  out.mixture.tau = cfg.get_double("tau", out.mixture.tau);
  out.mixture.dis_weight = cfg.get_double("dis_weight", out.mixture.dis_weight);
  out.mixture.lambda_ot = cfg.get_double("lambda_ot", out.mixture.lambda_ot);
  out.mixture.ot_epsilon = cfg.get_double("ot_epsilon", out.mixture.ot_epsilon);
  out.mixture.ot_max_iters =
      cfg.get_size("ot_max_iters", out.mixture.ot_max_iters);
  out.mixture.ot_tol = cfg.get_double("ot_tol", out.mixture.ot_tol);
  out.mixture.use_ot = cfg.get_bool("use_ot", out.mixture.use_ot);
  out.mixture.use_disentangle =
      cfg.get_bool("use_disentangle", out.mixture.use_disentangle);

  out.expert.lookback = cfg.get_size("dt_lookback", out.expert.lookback);
  out.expert.k1 = cfg.get_double("dt_k1", out.expert.k1);
  out.expert.k2 = cfg.get_double("dt_k2", out.expert.k2);

  out.validate();
  return out;
}

std::vector<RegimeSpec> parse_regime_specs(const std::string& text) {
  std::vector<RegimeSpec> specs;
  std::istringstream segments(text);
  std::string segment;
  while (std::getline(segments, segment, ';')) {
    segment = trim(segment);
    if (segment.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream fs(segment);
    std::string field;
    while (std::getline(fs, field, ':')) fields.push_back(trim(field));
    if (fields.size() != 5)
      throw ConfigError(
          "gen_regimes: expected kind:drift:noise_sigma:reversion:length, "
          "got '" +
          segment + "'");
    RegimeSpec spec;
    if (fields[0] == "momentum") {
      spec.regime = Regime::kMomentum;
    } else if (fields[0] == "reversion") {
      spec.regime = Regime::kMeanReversion;
    } else {
      throw ConfigError("gen_regimes: unknown kind '" + fields[0] +
                        "' (use momentum or reversion)");
    }
    spec.drift = parse_double("gen_regimes.drift", fields[1]);
    spec.noise_sigma = parse_double("gen_regimes.noise_sigma", fields[2]);
    spec.reversion_strength =
        parse_double("gen_regimes.reversion", fields[3]);
    spec.length =
        static_cast<std::size_t>(parse_u64("gen_regimes.length", fields[4]));
    specs.push_back(spec);
  }
  if (specs.empty())
    throw ConfigError("gen_regimes: no segments given");
  return specs;
}

GenerateConfig generate_config_from(const KeyValueConfig& cfg) {
  cfg.reject_unknown_keys();
  if (!cfg.has("gen_regimes"))
    throw ConfigError("config: generate needs the gen_regimes key");
  GenerateConfig out;
  out.regimes = parse_regime_specs(cfg.get_string("gen_regimes", ""));
  out.p0 = cfg.get_double("gen_p0", out.p0);
  out.seed = cfg.get_u64("seed", out.seed);
  if (!(out.p0 > 0.0))
    throw ConfigError("config: gen_p0 must be positive");
  return out;
}

double periods_per_year_from(const KeyValueConfig& cfg) {
  const double ppy = cfg.get_double("periods_per_year", 60480.0);
  if (!(ppy > 0.0))
    throw ConfigError("config: periods_per_year must be positive");
  return ppy;
}

}  // namespace mixtrade
