#pragma once

// Soil time series: CSV ingestion, cleaning, synthetic traces and conversion
// to path-loss observation sequences.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wusn/error.hpp"
#include "wusn/soil_channel.hpp"

namespace wusn {

using Reading = std::optional<double>;

struct SoilTimeSeries {
  std::int64_t start_time = 0;  // unix seconds
  double step_s = 600.0;
  std::vector<Reading> epsilon;
  std::vector<Reading> sigma;

  std::size_t size() const { return epsilon.size(); }
};

struct CleanedSeries {
  std::int64_t start_time = 0;
  double step_s = 600.0;
  std::vector<double> epsilon;
  std::vector<double> sigma;

  std::size_t size() const { return epsilon.size(); }
  bool operator==(const CleanedSeries&) const = default;
};

struct PathLossTrace {
  std::vector<double> pl_db;
  std::vector<double> delta_db;
  LinkGeometry geometry;

  std::size_t size() const { return pl_db.size(); }
};

/// Column mapping for CSV ingestion. Headers are matched case-insensitively.
struct CsvSchema {
  std::string time_column = "timestamp";
  std::string epsilon_column = "permittivity";
  std::string sigma_column = "conductivity";
  double step_s = 600.0;
  // Multiplier applied to conductivity readings (0.1 converts mS/cm to S/m).
  double sigma_scale = 1.0;
  // Time column holds a sample index rather than a timestamp.
  bool time_is_index = false;
  // Allowed deviation of consecutive timestamps from step_s.
  double time_tolerance_s = 1.0;

  /// Layout written by write_series_csv.
  static CsvSchema indexed(double step_s = 600.0) {
    CsvSchema s;
    s.time_column = "t_index";
    s.epsilon_column = "epsilon";
    s.sigma_column = "sigma";
    s.step_s = step_s;
    s.time_is_index = true;
    return s;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\"";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

// Splits one CSV record. Quoted fields may contain commas; embedded newlines
// are not supported.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

// Accepts unix seconds or ISO-8601 "YYYY-MM-DD[T ]HH:MM[:SS]" (UTC, optional Z).
inline std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (auto n = parse_number(text)) return static_cast<std::int64_t>(std::llround(*n));
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  const std::string buf(text);
  const int got = std::sscanf(buf.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s);
  if (got < 3 || (got > 3 && got < 6) || (got >= 4 && sep != 'T' && sep != ' ')) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) return std::nullopt;
  const auto secs = sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{s};
  return duration_cast<seconds>(secs).count();
}

inline std::string format_timestamp(std::int64_t unix_seconds) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{unix_seconds}};
  const auto dp = floor<days>(tp);
  const year_month_day ymd{dp};
  const hh_mm_ss hms{tp - dp};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_reading(const Reading& r) { return r ? format_double(*r) : std::string{}; }

}  // namespace detail

/// Reads a header-row CSV into a series. Empty, "NaN" or otherwise
/// unparseable numeric cells become missing readings.
inline SoilTimeSeries parse_csv(std::istream& in, const CsvSchema& schema = {}) {
  require(schema.step_s > 0, ErrorCode::invalid_config, "schema step must be positive");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  require(!detail::trim(line).empty(), ErrorCode::schema, "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = detail::split_csv_line(line);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(detail::lower(detail::trim(header[i])), i);
  auto column = [&](const std::string& name) {
    const auto it = index.find(detail::lower(name));
    require(it != index.end(), ErrorCode::schema, "missing required column '" + name + "'");
    return it->second;
  };
  const std::size_t t_col = column(schema.time_column);
  const std::size_t e_col = column(schema.epsilon_column);
  const std::size_t s_col = column(schema.sigma_column);
  const std::size_t needed = std::max({t_col, e_col, s_col}) + 1;

  SoilTimeSeries out;
  out.step_s = schema.step_s;
  std::optional<std::int64_t> prev;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() < needed) fields.resize(needed);

    std::optional<std::int64_t> t;
    if (schema.time_is_index) {
      if (auto idx = detail::parse_number(fields[t_col]))
        t = static_cast<std::int64_t>(std::llround(*idx * schema.step_s));
    } else {
      t = detail::parse_timestamp(fields[t_col]);
    }
    if (!t) throw TimingError(row, "unparseable timestamp on line " + std::to_string(line_no));
    if (prev) {
      const double gap = static_cast<double>(*t - *prev);
      if (gap <= 0)
        throw TimingError(row, (gap == 0 ? "duplicated" : "non-monotone") +
                                   std::string(" timestamp on line ") + std::to_string(line_no));
      if (std::abs(gap - schema.step_s) > schema.time_tolerance_s)
        throw TimingError(row, "irregular step of " + std::to_string(gap) + " s on line " +
                                   std::to_string(line_no));
    } else {
      out.start_time = *t;
    }
    prev = t;

    out.epsilon.push_back(detail::parse_number(fields[e_col]));
    Reading s = detail::parse_number(fields[s_col]);
    if (s) *s *= schema.sigma_scale;
    out.sigma.push_back(s);
    ++row;
  }
  return out;
}

inline SoilTimeSeries parse_csv(std::string_view text, const CsvSchema& schema = {}) {
  std::istringstream in{std::string(text)};
  return parse_csv(in, schema);
}

namespace detail {

// Floors present readings, then linearly fills interior gaps; edge gaps take
// the nearest present value.
inline std::vector<double> clean_channel(const std::vector<Reading>& raw, double floor,
                                         const char* name) {
  std::vector<double> out(raw.size());
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i]) {
      out[i] = std::max(*raw[i], floor);
      present.push_back(i);
    }
  }
  require(!present.empty(), ErrorCode::unrecoverable_data,
          std::string("channel '") + name + "' has no readings");
  for (std::size_t i = 0; i < present.front(); ++i) out[i] = out[present.front()];
  for (std::size_t i = present.back() + 1; i < raw.size(); ++i) out[i] = out[present.back()];
  for (std::size_t k = 0; k + 1 < present.size(); ++k) {
    const std::size_t a = present[k], b = present[k + 1];
    for (std::size_t i = a + 1; i < b; ++i)
      out[i] = out[a] + (out[b] - out[a]) * static_cast<double>(i - a) / static_cast<double>(b - a);
  }
  return out;
}

}  // namespace detail

inline CleanedSeries clean(const SoilTimeSeries& s) {
  require(s.epsilon.size() == s.sigma.size(), ErrorCode::invalid_input,
          "permittivity and conductivity lengths differ");
  require(s.size() >= 2, ErrorCode::invalid_input, "series needs at least two samples");
  CleanedSeries out;
  out.start_time = s.start_time;
  out.step_s = s.step_s;
  out.epsilon = detail::clean_channel(s.epsilon, 1.0, "permittivity");
  out.sigma = detail::clean_channel(s.sigma, 0.0, "conductivity");
  return out;
}

inline SoilTimeSeries to_series(const CleanedSeries& c) {
  SoilTimeSeries s;
  s.start_time = c.start_time;
  s.step_s = c.step_s;
  s.epsilon.assign(c.epsilon.begin(), c.epsilon.end());
  s.sigma.assign(c.sigma.begin(), c.sigma.end());
  return s;
}

inline PathLossTrace to_pathloss_trace(const CleanedSeries& s, const LinkGeometry& g) {
  PathLossTrace trace;
  trace.geometry = g;
  trace.pl_db.reserve(s.size());
  trace.delta_db.reserve(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    trace.pl_db.push_back(path_loss_db({s.epsilon[t], s.sigma[t]}, g));
    trace.delta_db.push_back(t == 0 ? 0.0 : trace.pl_db[t] - trace.pl_db[t - 1]);
  }
  return trace;
}

/// Rebuilds a trace from path-loss values alone (delta recomputed).
inline PathLossTrace make_trace(std::vector<double> pl_db, const LinkGeometry& g = {}) {
  PathLossTrace trace;
  trace.geometry = g;
  trace.delta_db.resize(pl_db.size(), 0.0);
  for (std::size_t t = 1; t < pl_db.size(); ++t) trace.delta_db[t] = pl_db[t] - pl_db[t - 1];
  trace.pl_db = std::move(pl_db);
  return trace;
}

// --- serialization ---------------------------------------------------------

/// t_index,epsilon,sigma with 17 significant digits; missing cells empty.
inline void write_series_csv(std::ostream& out, const SoilTimeSeries& s) {
  out << "t_index,epsilon,sigma\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << i << ',' << detail::format_reading(s.epsilon[i]) << ','
        << detail::format_reading(s.sigma[i]) << '\n';
}

inline void write_series_csv(std::ostream& out, const CleanedSeries& s) {
  write_series_csv(out, to_series(s));
}

/// timestamp,permittivity,conductivity with ISO-8601 UTC timestamps.
inline void write_timestamped_csv(std::ostream& out, const SoilTimeSeries& s) {
  out << "timestamp,permittivity,conductivity\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto t = s.start_time + static_cast<std::int64_t>(std::llround(s.step_s * static_cast<double>(i)));
    out << detail::format_timestamp(t) << ',' << detail::format_reading(s.epsilon[i]) << ','
        << detail::format_reading(s.sigma[i]) << '\n';
  }
}

inline void write_trace_csv(std::ostream& out, const PathLossTrace& trace) {
  out << "t_index,pl_db,delta_db\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << i << ',' << detail::format_double(trace.pl_db[i]) << ','
        << detail::format_double(trace.delta_db[i]) << '\n';
}

inline PathLossTrace parse_trace_csv(std::istream& in, const LinkGeometry& g = {}) {
  CsvSchema schema = CsvSchema::indexed(1.0);
  schema.epsilon_column = "pl_db";
  schema.sigma_column = "pl_db";
  const SoilTimeSeries raw = parse_csv(in, schema);
  std::vector<double> pl;
  pl.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    require(raw.epsilon[i].has_value(), ErrorCode::invalid_input,
            "missing path loss at row " + std::to_string(i));
    pl.push_back(*raw.epsilon[i]);
  }
  require(!pl.empty(), ErrorCode::invalid_input, "empty path-loss trace");
  return make_trace(std::move(pl), g);
}

// --- synthetic traces ------------------------------------------------------

/// One soil channel: base + yearly sinusoid + daily sinusoid + decaying
/// precipitation jumps + AR(1) noise, floored.
struct ChannelProcess {
  double base = 1.0;
  double seasonal_amplitude = 0.0;
  double seasonal_peak_day = 0.0;  // day of year of the seasonal maximum
  double daily_amplitude = 0.0;
  double daily_peak_hour = 0.0;
  double event_rate_per_day = 0.0;  // precipitation events (Poisson)
  double jump_size = 0.0;           // mean jump, exponentially distributed
  double decay_days = 1.0;          // e-folding time of a jump
  double ar_coefficient = 0.0;
  double noise_scale = 0.0;         // innovation standard deviation
  double floor = 0.0;
};

struct SynthConfig {
  // Defaults reproduce a montane soil year whose path loss at the default
  // link geometry swings by roughly 25 dB, with multi-day wet episodes.
  ChannelProcess permittivity{.base = 14.0,
                              .seasonal_amplitude = 7.0,
                              .seasonal_peak_day = 200.0,
                              .daily_amplitude = 0.4,
                              .daily_peak_hour = 15.0,
                              .event_rate_per_day = 0.05,
                              .jump_size = 4.0,
                              .decay_days = 2.0,
                              .ar_coefficient = 0.995,
                              .noise_scale = 0.05,
                              .floor = 1.0};
  ChannelProcess conductivity{.base = 1.42,
                              .seasonal_amplitude = 0.5,
                              .seasonal_peak_day = 120.0,
                              .daily_amplitude = 0.025,
                              .daily_peak_hour = 14.0,
                              .event_rate_per_day = 0.3,
                              .jump_size = 0.12,
                              .decay_days = 0.3,
                              .ar_coefficient = 0.995,
                              .noise_scale = 0.004,
                              .floor = 0.0};
  std::size_t length = 52560;  // one year at 10-minute steps
  double step_s = 600.0;
  std::int64_t start_time = 1483228800;  // 2017-01-01T00:00:00Z
  // Fraction of cells blanked to mimic telemetry gaps.
  double missing_rate = 0.0;
};

namespace detail {

inline std::vector<double> synth_channel(const ChannelProcess& p, std::size_t length, double step_s,
                                         std::mt19937_64& rng) {
  constexpr double day_s = 86400.0;
  constexpr double year_s = 365.0 * day_s;
  const double two_pi = 2.0 * std::numbers::pi;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const double event_prob = 1.0 - std::exp(-p.event_rate_per_day * step_s / day_s);
  const double decay = std::exp(-step_s / (p.decay_days * day_s));

  std::vector<double> out(length);
  double wet = 0.0;
  double ar = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    const double time = step_s * static_cast<double>(t);
    wet *= decay;
    if (p.event_rate_per_day > 0 && unif(rng) < event_prob) wet += p.jump_size * expo(rng);
    ar = p.ar_coefficient * ar + p.noise_scale * gauss(rng);
    const double seasonal =
        p.seasonal_amplitude * std::cos(two_pi * (time - p.seasonal_peak_day * day_s) / year_s);
    const double daily =
        p.daily_amplitude * std::cos(two_pi * (time - p.daily_peak_hour * 3600.0) / day_s);
    out[t] = std::max(p.floor, p.base + seasonal + daily + wet + ar);
  }
  return out;
}

}  // namespace detail

/// Deterministic for a fixed (config, seed). The two channels draw from
/// independent streams.
inline SoilTimeSeries synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  require(cfg.length >= 2, ErrorCode::invalid_config, "synthetic length must be >= 2");
  require(cfg.step_s > 0, ErrorCode::invalid_config, "synthetic step must be positive");
  require(cfg.missing_rate >= 0 && cfg.missing_rate < 1, ErrorCode::invalid_config,
          "missing rate must lie in [0, 1)");
  for (const ChannelProcess* p : {&cfg.permittivity, &cfg.conductivity}) {
    require(p->decay_days > 0 && p->event_rate_per_day >= 0 && p->noise_scale >= 0 &&
                std::abs(p->ar_coefficient) < 1,
            ErrorCode::invalid_config, "invalid channel process parameters");
  }
  // seed_seq keeps 32 bits per entry, so the seed goes in as two words.
  const auto lo = static_cast<std::uint32_t>(seed), hi = static_cast<std::uint32_t>(seed >> 32);
  std::seed_seq eps_seq{lo, hi, std::uint32_t{1}};
  std::seed_seq sig_seq{lo, hi, std::uint32_t{2}};
  std::seed_seq gap_seq{lo, hi, std::uint32_t{3}};
  std::mt19937_64 eps_rng(eps_seq), sig_rng(sig_seq), gap_rng(gap_seq);

  const auto eps = detail::synth_channel(cfg.permittivity, cfg.length, cfg.step_s, eps_rng);
  const auto sig = detail::synth_channel(cfg.conductivity, cfg.length, cfg.step_s, sig_rng);

  SoilTimeSeries s;
  s.start_time = cfg.start_time;
  s.step_s = cfg.step_s;
  s.epsilon.assign(eps.begin(), eps.end());
  s.sigma.assign(sig.begin(), sig.end());
  if (cfg.missing_rate > 0) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t t = 0; t < cfg.length; ++t) {
      if (unif(gap_rng) < cfg.missing_rate) s.epsilon[t].reset();
      if (unif(gap_rng) < cfg.missing_rate) s.sigma[t].reset();
    }
  }
  return s;
}

}  // namespace wusn
