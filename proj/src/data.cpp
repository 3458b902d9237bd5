#include "mixtrade/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mixtrade/rng.hpp"

namespace mixtrade {

namespace {

constexpr const char* kHeader = "timestamp,open,high,low,close,volume,value";
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string& field, std::size_t line_no,
                    const char* name) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    fail_line(line_no, std::string("malformed ") + name + " '" + field + "'");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void validate_bar(const Bar& b, std::size_t line_no) {
  if (!(b.open > 0.0 && b.high > 0.0 && b.low > 0.0 && b.close > 0.0))
    fail_line(line_no, "prices must be positive");
  if (b.low > std::min(b.open, b.close) || b.high < std::max(b.open, b.close))
    fail_line(line_no, "OHLC ordering violated");
  if (b.volume < 0.0 || b.value < 0.0)
    fail_line(line_no, "volume/value must be nonnegative");
}

}  // namespace

std::vector<Bar> load_bars(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError("empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader)
    throw DataError("header mismatch in '" + path + "': expected '" +
                    kHeader + "'");

  std::vector<Bar> bars;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7)
      fail_line(line_no, "expected 7 fields, got " +
                             std::to_string(fields.size()));

    Bar b;
    {
      const std::string& f = fields[0];
      auto [ptr, ec] =
          std::from_chars(f.data(), f.data() + f.size(), b.timestamp);
      if (ec != std::errc() || ptr != f.data() + f.size())
        fail_line(line_no, "malformed timestamp '" + f + "'");
    }
    b.open = parse_double(fields[1], line_no, "open");
    b.high = parse_double(fields[2], line_no, "high");
    b.low = parse_double(fields[3], line_no, "low");
    b.close = parse_double(fields[4], line_no, "close");
    b.volume = parse_double(fields[5], line_no, "volume");
    b.value = parse_double(fields[6], line_no, "value");
    validate_bar(b, line_no);

    if (!bars.empty()) {
      if (b.timestamp == bars.back().timestamp)
        fail_line(line_no, "duplicate timestamp " +
                               std::to_string(b.timestamp));
      if (b.timestamp < bars.back().timestamp)
        fail_line(line_no, "timestamps not increasing");
    }
    bars.push_back(b);
  }
  return bars;
}

void save_bars_csv(const std::string& path, const std::vector<Bar>& bars) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << kHeader << '\n';
  for (const Bar& b : bars) {
    out << b.timestamp << ',' << format_double(b.open) << ','
        << format_double(b.high) << ',' << format_double(b.low) << ','
        << format_double(b.close) << ',' << format_double(b.volume) << ','
        << format_double(b.value) << '\n';
  }
}

namespace {

struct Column {
  std::vector<double> v;
  std::vector<std::uint8_t> ok;
  explicit Column(std::size_t n)
      : v(n, kNan), ok(n, 0) {}
  void set(std::size_t i, double x) {
    v[i] = x;
    ok[i] = 1;
  }
};

Column rsi14(const std::vector<Bar>& bars) {
  const std::size_t n = bars.size();
  const std::size_t period = 14;
  Column col(n);
  if (n <= period) return col;
  double avg_gain = 0.0, avg_loss = 0.0;
  for (std::size_t t = 1; t <= period; ++t) {
    const double d = bars[t].close - bars[t - 1].close;
    avg_gain += std::max(d, 0.0);
    avg_loss += std::max(-d, 0.0);
  }
  avg_gain /= period;
  avg_loss /= period;
  auto rsi = [](double g, double l) {
    if (l == 0.0 && g == 0.0) return 50.0;
    if (l == 0.0) return 100.0;
    if (g == 0.0) return 0.0;
    return 100.0 - 100.0 / (1.0 + g / l);
  };
  col.set(period, rsi(avg_gain, avg_loss));
  for (std::size_t t = period + 1; t < n; ++t) {
    const double d = bars[t].close - bars[t - 1].close;
    avg_gain = (avg_gain * (period - 1) + std::max(d, 0.0)) / period;
    avg_loss = (avg_loss * (period - 1) + std::max(-d, 0.0)) / period;
    col.set(t, rsi(avg_gain, avg_loss));
  }
  return col;
}

Column macd_hist(const std::vector<Bar>& bars) {
  const std::size_t n = bars.size();
  Column col(n);
  // EMA(12) - EMA(26), then a 9-period signal EMA over that difference.
  // EMAs are seeded with their first input, so the difference is
  // meaningful from index 25 and the histogram from index 33.
  const std::size_t macd_start = 25, hist_start = 33;
  if (n <= hist_start) return col;
  const double a12 = 2.0 / 13.0, a26 = 2.0 / 27.0, a9 = 2.0 / 10.0;
  double e12 = bars[0].close, e26 = bars[0].close;
  double sig = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    e12 += a12 * (bars[t].close - e12);
    e26 += a26 * (bars[t].close - e26);
    const double macd = e12 - e26;
    if (t == macd_start) sig = macd;
    if (t > macd_start) sig += a9 * (macd - sig);
    if (t >= hist_start) col.set(t, macd - sig);
  }
  return col;
}

Column boll_pb(const std::vector<Bar>& bars) {
  const std::size_t n = bars.size();
  const std::size_t period = 20;
  Column col(n);
  for (std::size_t t = period - 1; t < n; ++t) {
    double mean = 0.0;
    for (std::size_t i = t + 1 - period; i <= t; ++i) mean += bars[i].close;
    mean /= period;
    double var = 0.0;
    for (std::size_t i = t + 1 - period; i <= t; ++i) {
      const double d = bars[i].close - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / period);
    if (sd == 0.0)
      col.set(t, 0.5);
    else
      col.set(t, (bars[t].close - (mean - 2.0 * sd)) / (4.0 * sd));
  }
  return col;
}

Column mom10(const std::vector<Bar>& bars) {
  const std::size_t n = bars.size();
  const std::size_t period = 10;
  Column col(n);
  for (std::size_t t = period; t < n; ++t)
    col.set(t, bars[t].close / bars[t - period].close - 1.0);
  return col;
}

Column atr14(const std::vector<Bar>& bars) {
  const std::size_t n = bars.size();
  const std::size_t period = 14;
  Column col(n);
  if (n <= period) return col;
  auto tr = [&](std::size_t t) {
    const double pc = bars[t - 1].close;
    return std::max({bars[t].high - bars[t].low,
                     std::fabs(bars[t].high - pc),
                     std::fabs(bars[t].low - pc)});
  };
  double atr = 0.0;
  for (std::size_t t = 1; t <= period; ++t) atr += tr(t);
  atr /= period;
  col.set(period, atr);
  for (std::size_t t = period + 1; t < n; ++t) {
    atr = (atr * (period - 1) + tr(t)) / period;
    col.set(t, atr);
  }
  return col;
}

}  // namespace

const std::vector<std::string>& default_indicators() {
  static const std::vector<std::string> names{"rsi14", "macd_hist", "boll_pb",
                                              "mom10", "atr14"};
  return names;
}

IndicatorSeries compute_indicators(const std::vector<Bar>& bars,
                                   const std::vector<std::string>& names) {
  if (bars.empty()) throw DataError("compute_indicators: no bars");
  IndicatorSeries out;
  out.names = names;
  out.bar_count = bars.size();
  const std::size_t k = names.size();
  out.values.assign(bars.size() * k, kNan);
  out.valid.assign(bars.size() * k, 0);

  for (std::size_t slot = 0; slot < k; ++slot) {
    Column col(0);
    if (names[slot] == "rsi14")
      col = rsi14(bars);
    else if (names[slot] == "macd_hist")
      col = macd_hist(bars);
    else if (names[slot] == "boll_pb")
      col = boll_pb(bars);
    else if (names[slot] == "mom10")
      col = mom10(bars);
    else if (names[slot] == "atr14")
      col = atr14(bars);
    else
      throw ConfigError("unknown indicator '" + names[slot] + "'");
    for (std::size_t t = 0; t < bars.size(); ++t) {
      out.values[t * k + slot] = col.v[t];
      out.valid[t * k + slot] = col.ok[t];
    }
  }

  out.first_valid = bars.size();
  for (std::size_t t = 0; t < bars.size(); ++t) {
    bool all = true;
    for (std::size_t slot = 0; slot < k; ++slot)
      if (!out.is_valid(t, slot)) {
        all = false;
        break;
      }
    if (all) {
      out.first_valid = t;
      break;
    }
  }
  return out;
}

std::vector<Bar> generate_synthetic(const std::vector<RegimeSpec>& specs,
                                    std::uint64_t seed, double p0) {
  if (specs.empty()) throw ConfigError("generate_synthetic: empty spec list");
  if (!(p0 > 0.0)) throw ConfigError("generate_synthetic: p0 must be > 0");
  for (const RegimeSpec& s : specs) {
    if (s.length < 1) throw ConfigError("generate_synthetic: length >= 1");
    if (s.noise_sigma < 0.0)
      throw ConfigError("generate_synthetic: noise_sigma >= 0");
    if (s.reversion_strength < 0.0 || s.reversion_strength > 1.0)
      throw ConfigError("generate_synthetic: reversion_strength in [0,1]");
  }

  Rng rng(Rng::derive(seed, rng_role::kData));
  std::vector<Bar> bars;
  double p = p0;
  double prev_close = p0;
  std::int64_t ts = 1577836800;  // fixed origin; one bar per minute

  for (const RegimeSpec& s : specs) {
    const double anchor = std::log(p);
    for (std::size_t i = 0; i < s.length; ++i) {
      const double z = rng.normal();
      if (s.regime == Regime::kMomentum) {
        const double factor = 1.0 + s.drift + s.noise_sigma * z;
        p *= std::max(factor, 1e-6);
      } else {
        double x = std::log(p);
        x += s.reversion_strength * (anchor - x) + s.noise_sigma * z;
        p = std::exp(x);
      }

      Bar b;
      b.timestamp = ts;
      ts += 60;
      b.open = prev_close;
      b.close = p;
      const double wick = 0.25 * s.noise_sigma;
      const double u_hi = rng.uniform(0.0, wick);
      const double u_lo = rng.uniform(0.0, wick);
      b.high = std::max(b.open, b.close) * (1.0 + u_hi);
      b.low = std::min(b.open, b.close) * (1.0 - u_lo);
      const double ret = b.close / b.open - 1.0;
      b.volume = std::round(1000.0 * (1.0 + 10.0 * std::fabs(ret)));
      b.value = b.volume * b.close;
      bars.push_back(b);
      prev_close = p;
    }
  }
  return bars;
}

FeatureScaler FeatureScaler::fit(const std::vector<double>& rows,
                                 std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0)
    throw ShapeError("FeatureScaler::fit: rows not divisible by dim");
  const std::size_t n = rows.size() / dim;
  if (n == 0) throw ShapeError("FeatureScaler::fit: no rows");
  FeatureScaler s;
  s.mean.assign(dim, 0.0);
  s.stdev.assign(dim, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) s.mean[j] += rows[i * dim + j];
  for (double& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = rows[i * dim + j] - s.mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < dim; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    s.stdev[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

void FeatureScaler::apply(const double* in, double* out) const {
  for (std::size_t j = 0; j < mean.size(); ++j)
    out[j] = (in[j] - mean[j]) / stdev[j];
}

nlohmann::json FeatureScaler::to_json() const {
  return {{"mean", mean}, {"stdev", stdev}};
}

FeatureScaler FeatureScaler::from_json(const nlohmann::json& j) {
  FeatureScaler s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stdev = j.at("stdev").get<std::vector<double>>();
  if (s.mean.size() != s.stdev.size())
    throw DataError("scaler: mean/stdev length mismatch");
  return s;
}

}  // namespace mixtrade
