#include "mixtrade/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mixtrade/backtest.hpp"
#include "mixtrade/config.hpp"
#include "mixtrade/data.hpp"
#include "mixtrade/errors.hpp"
#include "mixtrade/manifest.hpp"
#include "mixtrade/trainer.hpp"

namespace mixtrade {
namespace {

std::string resolve_out_dir(const std::string& user_out,
                            const std::string& command) {
  if (!user_out.empty()) return user_out;
  const char* root = std::getenv("MIXTRADE_OUT_ROOT");
  const std::string base = command + "_out";
  return root == nullptr || *root == '\0' ? base
                                          : std::string(root) + "/" + base;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << content;
  if (!out) throw DataError("failed while writing: " + path);
}

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

std::string table_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    const std::string t = field;
    if (t.empty()) continue;
    if (t.find('-') != std::string::npos)
      throw ConfigError("--seeds: not a non-negative integer: " + t);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(t, &used);
    } catch (const std::exception&) {
      throw ConfigError("--seeds: not an integer: " + t);
    }
    if (used != t.size())
      throw ConfigError("--seeds: trailing text in: " + t);
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) throw ConfigError("--seeds: empty list");
  return seeds;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string comparison_row(const BacktestReport& r) {
  std::string line = r.policy_name + "," + std::to_string(r.profits.size());
  for (double v : {r.metrics.arr, r.metrics.vo, r.metrics.asr, r.metrics.mdd,
                   r.metrics.cr, r.metrics.sor}) {
    line += ",";
    append_double(line, v);
  }
  line += "," + std::to_string(r.trade_count) + "," + r.termination_reason;
  return line;
}

void print_comparison(const std::vector<BacktestReport>& reports) {
  std::cout << "policy        arr          asr          mdd          sor\n";
  for (const BacktestReport& r : reports) {
    char name[16];
    std::snprintf(name, sizeof(name), "%-13s", r.policy_name.c_str());
    std::cout << name << " " << table_double(r.metrics.arr) << "  "
              << table_double(r.metrics.asr) << "  "
              << table_double(r.metrics.mdd) << "  "
              << table_double(r.metrics.sor) << "\n";
  }
}

void write_report_files(const BacktestReport& rep, const std::string& dir) {
  write_text_file(dir + "/" + rep.policy_name + "_report.json",
                  report_json(rep).dump(2) + "\n");
  write_equity_csv(rep, dir + "/" + rep.policy_name + "_equity.csv");
  write_actions_csv(rep, dir + "/" + rep.policy_name + "_actions.csv");
}

void write_gate_csv(const std::string& path,
                    const std::vector<std::size_t>& bars,
                    const std::vector<double>& gate, std::size_t k) {
  std::string content = "bar";
  for (std::size_t j = 1; j <= k; ++j)
    content += ",q_" + std::to_string(j);
  content += "\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    content += std::to_string(bars[i]);
    for (std::size_t j = 0; j < k; ++j) {
      content += ",";
      append_double(content, gate[i * k + j]);
    }
    content += "\n";
  }
  write_text_file(path, content);
}

struct TrainFlags {
  bool no_pretrain = false;
  bool single_actor = false;
  bool no_ot = false;
  std::size_t actors = 0;  // 0 = keep the config value
};

TrainConfig apply_train_flags(TrainConfig cfg, const TrainFlags& flags) {
  if (flags.no_pretrain) cfg.pretrain = false;
  if (flags.actors > 0) cfg.mixture.actor_count = flags.actors;
  if (flags.single_actor) cfg.mixture.actor_count = 1;
  if (flags.no_ot) {
    cfg.mixture.lambda_ot = 0.0;  // the alignment term vanishes...
    cfg.mixture.use_ot = false;   // ...and the transport solve is skipped
  }
  cfg.validate();
  return cfg;
}

int cmd_generate(const std::string& config_path, const std::string& out_arg) {
  const KeyValueConfig kv = KeyValueConfig::from_file(config_path);
  const GenerateConfig gen = generate_config_from(kv);
  const std::string out = resolve_out_dir(out_arg, "generate");

  RunManifest m;
  m.command = "generate";
  m.config_path = config_path;
  m.config_hash = hex64(fnv1a64_file(config_path));
  m.seed = gen.seed;
  m.output_dir = out;
  write_manifest(m, out);

  const std::vector<Bar> bars = generate_synthetic(gen.regimes, gen.seed,
                                                   gen.p0);
  const std::string data_path = out + "/data.csv";
  save_bars_csv(data_path, bars);
  std::cout << "generate: " << bars.size() << " bars -> " << data_path
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_arg, const TrainFlags& flags) {
  const KeyValueConfig kv = KeyValueConfig::from_file(config_path);
  const TrainConfig cfg = apply_train_flags(train_config_from(kv), flags);
  const std::vector<Bar> bars = load_bars(data_path);
  const std::string out = resolve_out_dir(out_arg, "train");

  RunManifest m;
  m.command = "train";
  m.config_path = config_path;
  m.config_hash = hex64(fnv1a64_file(config_path));
  m.data_path = data_path;
  m.data_hash = hex64(fnv1a64_file(data_path));
  m.seed = cfg.seed;
  m.output_dir = out;
  write_manifest(m, out);

  const MixtureTrainResult res = train_mixture(cfg, bars);

  std::string diag;
  for (const std::string& line : res.log) diag += line + "\n";
  write_text_file(out + "/diagnostics.jsonl", diag);

  write_text_file(out + "/checkpoint.json",
                  mixture_checkpoint(res.nets, res.builder, cfg, res.split)
                          .dump(2) +
                      "\n");

  write_gate_csv(out + "/alloc_weights.csv", res.final_gate_bars,
                 res.final_gate, cfg.mixture.actor_count);

  std::cout << "train: " << res.log.size() << " diagnostic lines, "
            << "train window [" << res.split.warm_up << ", "
            << res.split.train_end << "), checkpoint -> " << out
            << "/checkpoint.json\n";
  return 0;
}

int cmd_backtest(const std::string& config_path, const std::string& data_path,
                 const std::string& checkpoint_path,
                 const std::string& baseline, const std::string& out_arg) {
  const KeyValueConfig kv = KeyValueConfig::from_file(config_path);
  const TrainConfig base = train_config_from(kv);
  const double ppy = periods_per_year_from(kv);
  const std::vector<Bar> bars = load_bars(data_path);
  const IndicatorSeries indicators =
      compute_indicators(bars, default_indicators());
  const std::string out = resolve_out_dir(out_arg, "backtest");

  RunManifest m;
  m.command = "backtest";
  m.config_path = config_path;
  m.config_hash = hex64(fnv1a64_file(config_path));
  m.data_path = data_path;
  m.data_hash = hex64(fnv1a64_file(data_path));
  m.seed = base.seed;
  m.output_dir = out;
  write_manifest(m, out);

  std::optional<LoadedMixture> loaded;
  std::size_t start = 0;
  const std::size_t end = bars.size();
  if (!checkpoint_path.empty()) {
    loaded = load_mixture_checkpoint(read_json_file(checkpoint_path));
    start = loaded->split.train_end;  // held-out bars only
    if (start + 1 >= end)
      throw DataError(
          "backtest: no held-out bars after the checkpoint's training "
          "window");
  } else {
    start = std::max({indicators.first_valid, base.expert.lookback,
                      std::size_t{1}});
    if (start + 1 >= end)
      throw DataError("backtest: series ends inside the warm-up");
  }

  HoldPolicy long_hold(1);
  HoldPolicy short_hold(-1);
  DualThrustPolicy dual_thrust(bars, base.expert);
  std::optional<MixturePolicy> mixture;
  std::vector<Policy*> roster;
  if (!baseline.empty()) {
    if (baseline == "long_hold") {
      roster = {&long_hold};
    } else if (baseline == "short_hold") {
      roster = {&short_hold};
    } else if (baseline == "dual_thrust") {
      roster = {&dual_thrust};
    } else {
      throw ConfigError("backtest: unknown baseline '" + baseline +
                        "' (valid: long_hold, short_hold, dual_thrust)");
    }
  } else {
    roster = {&long_hold, &short_hold, &dual_thrust};
    if (loaded) {
      mixture.emplace(loaded->nets, loaded->builder, loaded->tau, bars);
      roster.push_back(&*mixture);
    }
  }

  // every policy under the config's env, over the identical window
  const std::vector<BacktestReport> reports =
      baseline_suite(roster, bars, indicators, base.env, start, end, ppy);

  std::string table =
      "policy,samples,arr,vo,asr,mdd,cr,sor,trade_count,termination\n";
  for (const BacktestReport& rep : reports) {
    write_report_files(rep, out);
    table += comparison_row(rep) + "\n";
  }
  write_text_file(out + "/comparison.csv", table);
  if (mixture)
    write_gate_csv(out + "/mixture_gate.csv",
                   reports.back().bars, mixture->gate_log(),
                   loaded->nets.actor_count);

  print_comparison(reports);
  std::cout << "backtest: window [" << start << ", " << end << "), reports -> "
            << out << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data_path,
               const std::string& out_arg, const std::string& seeds_arg) {
  const KeyValueConfig kv = KeyValueConfig::from_file(config_path);
  const TrainConfig base = train_config_from(kv);
  const double ppy = periods_per_year_from(kv);
  const std::vector<Bar> bars = load_bars(data_path);
  const IndicatorSeries indicators =
      compute_indicators(bars, default_indicators());
  const std::string out = resolve_out_dir(out_arg, "ablate");
  const std::vector<std::uint64_t> seeds =
      seeds_arg.empty() ? std::vector<std::uint64_t>{base.seed}
                        : parse_seed_list(seeds_arg);

  RunManifest m;
  m.command = "ablate";
  m.config_path = config_path;
  m.config_hash = hex64(fnv1a64_file(config_path));
  m.data_path = data_path;
  m.data_hash = hex64(fnv1a64_file(data_path));
  m.seed = seeds.front();
  m.output_dir = out;
  write_manifest(m, out);

  const std::vector<std::string> variants = {"mot", "mot_np", "mot_nd",
                                             "mot_no"};
  std::string csv = "variant,seed,arr,vo,asr,mdd,cr,sor,final_equity\n";
  nlohmann::json rows = nlohmann::json::array();
  std::map<std::string, std::vector<double>> arr_by_variant;

  for (const std::uint64_t seed : seeds) {
    for (const std::string& variant : variants) {
      TrainFlags flags;
      flags.no_pretrain = variant == "mot_np";
      flags.single_actor = variant == "mot_nd";
      flags.no_ot = variant == "mot_no";
      TrainConfig cfg = apply_train_flags(base, flags);
      cfg.seed = seed;

      const MixtureTrainResult res = train_mixture(cfg, bars);
      MixturePolicy policy(res.nets, res.builder, cfg.mixture.tau, bars);
      const BacktestReport rep =
          run_policy(policy, bars, indicators, cfg.env, res.split.train_end,
                     res.split.series_end, ppy);

      std::string line = variant + "," + std::to_string(seed);
      for (double v : {rep.metrics.arr, rep.metrics.vo, rep.metrics.asr,
                       rep.metrics.mdd, rep.metrics.cr, rep.metrics.sor,
                       rep.equity_curve.back()}) {
        line += ",";
        append_double(line, v);
      }
      csv += line + "\n";
      rows.push_back({{"variant", variant},
                      {"seed", seed},
                      {"arr", rep.metrics.arr},
                      {"asr", rep.metrics.asr},
                      {"mdd", rep.metrics.mdd},
                      {"sor", rep.metrics.sor}});
      arr_by_variant[variant].push_back(rep.metrics.arr);
      std::cout << "ablate: " << variant << " seed " << seed << " arr "
                << table_double(rep.metrics.arr) << "\n";
    }
  }

  nlohmann::json medians;
  for (const auto& [variant, arrs] : arr_by_variant)
    medians[variant] = median_of(arrs);
  write_text_file(out + "/ablation.csv", csv);
  write_text_file(
      out + "/ablation.json",
      nlohmann::json{{"rows", rows}, {"median_arr", medians}}.dump(2) + "\n");

  std::cout << "ablate: median arr by variant\n";
  for (const auto& [variant, arrs] : arr_by_variant)
    std::cout << "  " << variant << " " << table_double(median_of(arrs))
              << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"mixture-of-actors trading workbench"};
  app.require_subcommand(1);

  std::string gen_config;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("generate", "write a synthetic series");
  gen->add_option("--config", gen_config, "key=value config file")
      ->required();
  gen->add_option("--out", gen_out, "output directory");

  std::string train_config;
  std::string train_data;
  std::string train_out;
  TrainFlags flags;
  CLI::App* train = app.add_subcommand("train", "train a policy");
  train->add_option("--config", train_config, "key=value config file")
      ->required();
  train->add_option("--data", train_data, "bar CSV")->required();
  train->add_option("--out", train_out, "output directory");
  train->add_flag("--no-pretrain", flags.no_pretrain,
                  "skip the supervised warm start");
  CLI::Option* single = train->add_flag("--single-actor", flags.single_actor,
                                        "force one actor");
  train->add_flag("--no-ot", flags.no_ot,
                  "zero the alignment weight and skip the transport solve");
  train->add_option("--actors", flags.actors, "actor count")
      ->excludes(single);

  std::string bt_config;
  std::string bt_data;
  std::string bt_checkpoint;
  std::string bt_baseline;
  std::string bt_out;
  CLI::App* bt = app.add_subcommand("backtest", "evaluate policies");
  bt->add_option("--config", bt_config, "key=value config file")->required();
  bt->add_option("--data", bt_data, "bar CSV")->required();
  CLI::Option* ck = bt->add_option("--checkpoint", bt_checkpoint,
                                   "trained checkpoint JSON");
  bt->add_option("--baseline", bt_baseline,
                 "run one baseline: long_hold, short_hold, dual_thrust")
      ->excludes(ck);
  bt->add_option("--out", bt_out, "output directory");

  std::string ab_config;
  std::string ab_data;
  std::string ab_out;
  std::string ab_seeds;
  CLI::App* ab = app.add_subcommand("ablate", "train and score the variants");
  ab->add_option("--config", ab_config, "key=value config file")->required();
  ab->add_option("--data", ab_data, "bar CSV")->required();
  ab->add_option("--out", ab_out, "output directory");
  ab->add_option("--seeds", ab_seeds, "comma-separated seed list");

  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("mixtrade");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const std::string& s : full) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_config, gen_out);
    if (train->parsed())
      return cmd_train(train_config, train_data, train_out, flags);
    if (bt->parsed())
      return cmd_backtest(bt_config, bt_data, bt_checkpoint, bt_baseline,
                          bt_out);
    if (ab->parsed()) return cmd_ablate(ab_config, ab_data, ab_out, ab_seeds);
    throw ConfigError("no command given");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace mixtrade
