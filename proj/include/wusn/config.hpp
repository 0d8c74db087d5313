#pragma once

// Experiment configuration: an INI-style document with [sections] and
// key = value pairs. Defaults are the reference simulation parameters.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "wusn/data_pipeline.hpp"
#include "wusn/error.hpp"
#include "wusn/hmm.hpp"
#include "wusn/mdp.hpp"
#include "wusn/simulator.hpp"
#include "wusn/soil_channel.hpp"

namespace wusn {

struct HmmSettings {
  std::size_t n_states = 15;
  std::size_t max_iters = 500;
  double tol = 1e-6;
  double cov_floor = 1e-6;
  // Train on at most this many leading samples (0 = whole sequence).
  std::size_t window = 0;
};

struct SolverSettings {
  double tol = 1e-10;
  std::size_t max_iters = 1000;
};

struct SweepConfig {
  std::vector<double> powers_w{0.001, 0.002, 0.005, 0.01, 0.0125, 0.015, 0.02, 0.05, 0.1};
  std::vector<std::size_t> queue_sizes{10, 20, 50, 100, 150, 200, 300};
  double queue_power_w = 0.01;
  std::vector<AgentKind> kinds{AgentKind::rl, AgentKind::bpsk, AgentKind::psk8};
};

struct RunConfig {
  std::uint64_t seed = 2017;
  LinkGeometry geometry;
  RadioConfig radio;
  HmmSettings hmm;
  MdpParams mdp;
  SolverSettings solver;
  SynthConfig synth;
  CsvSchema schema;
  SweepConfig sweep;
  bool genie_state = false;
};

/// Independent stream for one pipeline stage, derived from the top-level seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stage + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum SeedStage : std::uint64_t { seed_synth = 0, seed_hmm = 1, seed_sim = 2 };

namespace detail {

// Numbers may be written as a ratio such as 1/60000.
inline double parse_real(const std::string& key, const std::string& text) {
  const auto slash = text.find('/');
  auto number = [&](std::string_view s) {
    auto v = parse_number(s);
    require(v.has_value(), ErrorCode::invalid_config, "key '" + key + "': not a number: '" + text + "'");
    return *v;
  };
  if (slash == std::string::npos) return number(text);
  const double den = number(std::string_view(text).substr(slash + 1));
  require(den != 0.0, ErrorCode::invalid_config, "key '" + key + "': division by zero");
  return number(std::string_view(text).substr(0, slash)) / den;
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

class ConfigReader {
 public:
  explicit ConfigReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  void real(const std::string& key, double& out) const {
    if (auto v = tree_.get_optional<std::string>(key)) out = parse_real(key, *v);
  }
  template <class Int>
  void integer(const std::string& key, Int& out) const {
    if (auto v = tree_.get_optional<std::string>(key)) {
      const double d = parse_real(key, *v);
      require(d == std::floor(d) && d >= 0, ErrorCode::invalid_config, "key '" + key + "' must be a non-negative integer");
      out = static_cast<Int>(d);
    }
  }
  void text(const std::string& key, std::string& out) const {
    if (auto v = tree_.get_optional<std::string>(key)) out = std::string(trim(*v));
  }
  void flag(const std::string& key, bool& out) const {
    if (auto v = tree_.get_optional<std::string>(key)) {
      const std::string s = lower(trim(*v));
      require(s == "true" || s == "false" || s == "1" || s == "0", ErrorCode::invalid_config,
              "key '" + key + "' must be true or false");
      out = s == "true" || s == "1";
    }
  }
  void process(const std::string& section, ChannelProcess& p) const {
    real(section + ".base", p.base);
    real(section + ".seasonal_amplitude", p.seasonal_amplitude);
    real(section + ".seasonal_peak_day", p.seasonal_peak_day);
    real(section + ".daily_amplitude", p.daily_amplitude);
    real(section + ".daily_peak_hour", p.daily_peak_hour);
    real(section + ".event_rate_per_day", p.event_rate_per_day);
    real(section + ".jump_size", p.jump_size);
    real(section + ".decay_days", p.decay_days);
    real(section + ".ar_coefficient", p.ar_coefficient);
    real(section + ".noise_scale", p.noise_scale);
    real(section + ".floor", p.floor);
  }

 private:
  const boost::property_tree::ptree& tree_;
};

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::invalid_config, e.what());
  }
  RunConfig c;
  const detail::ConfigReader r(tree);
  r.integer("seed", c.seed);
  r.flag("genie_state", c.genie_state);

  r.real("geometry.depth_m", c.geometry.depth_m);
  r.real("geometry.distance_m", c.geometry.distance_m);
  r.real("geometry.frequency_hz", c.geometry.frequency_hz);
  r.real("geometry.tx_gain_db", c.geometry.tx_gain_db);
  r.real("geometry.rx_gain_db", c.geometry.rx_gain_db);

  r.real("radio.tx_power_w", c.radio.tx_power_w);
  double noise_dbm = watt_to_dbm(c.radio.noise_w);
  r.real("radio.noise_dbm", noise_dbm);
  c.radio.noise_w = dbm_to_watt(noise_dbm);
  r.real("radio.symbol_time_s", c.radio.symbol_time_s);
  r.integer("radio.packet_bits", c.radio.packet_bits);

  r.integer("hmm.n_states", c.hmm.n_states);
  r.integer("hmm.max_iters", c.hmm.max_iters);
  r.real("hmm.tol", c.hmm.tol);
  r.real("hmm.cov_floor", c.hmm.cov_floor);
  r.integer("hmm.window", c.hmm.window);

  r.integer("mdp.queue_capacity", c.mdp.queue_capacity);
  r.integer("mdp.t_max", c.mdp.t_max);
  r.real("mdp.alpha1", c.mdp.alpha1);
  r.real("mdp.alpha2", c.mdp.alpha2);
  r.real("mdp.discount", c.mdp.discount);
  r.real("mdp.tol", c.solver.tol);
  r.integer("mdp.max_iters", c.solver.max_iters);

  r.integer("synth.length", c.synth.length);
  r.real("synth.step_s", c.synth.step_s);
  r.integer("synth.start_time", c.synth.start_time);
  r.real("synth.missing_rate", c.synth.missing_rate);
  r.process("permittivity", c.synth.permittivity);
  r.process("conductivity", c.synth.conductivity);

  r.text("csv.time_column", c.schema.time_column);
  r.text("csv.epsilon_column", c.schema.epsilon_column);
  r.text("csv.sigma_column", c.schema.sigma_column);
  r.real("csv.step_s", c.schema.step_s);
  r.real("csv.sigma_scale", c.schema.sigma_scale);
  r.flag("csv.time_is_index", c.schema.time_is_index);

  if (auto v = tree.get_optional<std::string>("sweep.powers_w")) {
    c.sweep.powers_w.clear();
    for (const auto& s : detail::split_list(*v)) c.sweep.powers_w.push_back(detail::parse_real("sweep.powers_w", s));
  }
  if (auto v = tree.get_optional<std::string>("sweep.queue_sizes")) {
    c.sweep.queue_sizes.clear();
    for (const auto& s : detail::split_list(*v))
      c.sweep.queue_sizes.push_back(static_cast<std::size_t>(detail::parse_real("sweep.queue_sizes", s)));
  }
  if (auto v = tree.get_optional<std::string>("sweep.kinds")) {
    c.sweep.kinds.clear();
    for (const auto& s : detail::split_list(*v)) c.sweep.kinds.push_back(agent_kind_from_string(s));
  }
  r.real("sweep.queue_power_w", c.sweep.queue_power_w);

  c.radio.validate();
  c.mdp.validate();
  require(c.hmm.n_states >= 1, ErrorCode::invalid_config, "hmm.n_states must be >= 1");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open config '" + path + "'");
  return parse_config(in);
}

/// Effective configuration in the same format parse_config reads.
inline void print_config(std::ostream& out, const RunConfig& c) {
  using detail::format_double;
  auto process = [&](const char* name, const ChannelProcess& p) {
    out << "\n[" << name << "]\n"
        << "base = " << format_double(p.base) << '\n'
        << "seasonal_amplitude = " << format_double(p.seasonal_amplitude) << '\n'
        << "seasonal_peak_day = " << format_double(p.seasonal_peak_day) << '\n'
        << "daily_amplitude = " << format_double(p.daily_amplitude) << '\n'
        << "daily_peak_hour = " << format_double(p.daily_peak_hour) << '\n'
        << "event_rate_per_day = " << format_double(p.event_rate_per_day) << '\n'
        << "jump_size = " << format_double(p.jump_size) << '\n'
        << "decay_days = " << format_double(p.decay_days) << '\n'
        << "ar_coefficient = " << format_double(p.ar_coefficient) << '\n'
        << "noise_scale = " << format_double(p.noise_scale) << '\n'
        << "floor = " << format_double(p.floor) << '\n';
  };
  out << "seed = " << c.seed << '\n' << "genie_state = " << (c.genie_state ? "true" : "false") << '\n';
  out << "\n[geometry]\n"
      << "depth_m = " << format_double(c.geometry.depth_m) << '\n'
      << "distance_m = " << format_double(c.geometry.distance_m) << '\n'
      << "frequency_hz = " << format_double(c.geometry.frequency_hz) << '\n'
      << "tx_gain_db = " << format_double(c.geometry.tx_gain_db) << '\n'
      << "rx_gain_db = " << format_double(c.geometry.rx_gain_db) << '\n';
  out << "\n[radio]\n"
      << "tx_power_w = " << format_double(c.radio.tx_power_w) << '\n'
      << "noise_dbm = " << format_double(watt_to_dbm(c.radio.noise_w)) << '\n'
      << "symbol_time_s = " << format_double(c.radio.symbol_time_s) << '\n'
      << "packet_bits = " << c.radio.packet_bits << '\n';
  out << "\n[hmm]\n"
      << "n_states = " << c.hmm.n_states << '\n'
      << "max_iters = " << c.hmm.max_iters << '\n'
      << "tol = " << format_double(c.hmm.tol) << '\n'
      << "cov_floor = " << format_double(c.hmm.cov_floor) << '\n'
      << "window = " << c.hmm.window << '\n';
  out << "\n[mdp]\n"
      << "queue_capacity = " << c.mdp.queue_capacity << '\n'
      << "t_max = " << c.mdp.t_max << '\n'
      << "alpha1 = " << format_double(c.mdp.alpha1) << '\n'
      << "alpha2 = " << format_double(c.mdp.alpha2) << '\n'
      << "discount = " << format_double(c.mdp.discount) << '\n'
      << "tol = " << format_double(c.solver.tol) << '\n'
      << "max_iters = " << c.solver.max_iters << '\n';
  out << "\n[synth]\n"
      << "length = " << c.synth.length << '\n'
      << "step_s = " << format_double(c.synth.step_s) << '\n'
      << "start_time = " << c.synth.start_time << '\n'
      << "missing_rate = " << format_double(c.synth.missing_rate) << '\n';
  process("permittivity", c.synth.permittivity);
  process("conductivity", c.synth.conductivity);
  out << "\n[csv]\n"
      << "time_column = " << c.schema.time_column << '\n'
      << "epsilon_column = " << c.schema.epsilon_column << '\n'
      << "sigma_column = " << c.schema.sigma_column << '\n'
      << "step_s = " << format_double(c.schema.step_s) << '\n'
      << "sigma_scale = " << format_double(c.schema.sigma_scale) << '\n'
      << "time_is_index = " << (c.schema.time_is_index ? "true" : "false") << '\n';
  out << "\n[sweep]\n"
      << "powers_w = " << detail::join_reals(c.sweep.powers_w) << '\n'
      << "queue_sizes = ";
  for (std::size_t i = 0; i < c.sweep.queue_sizes.size(); ++i) out << (i ? ", " : "") << c.sweep.queue_sizes[i];
  out << "\nqueue_power_w = " << format_double(c.sweep.queue_power_w) << '\n' << "kinds = ";
  for (std::size_t i = 0; i < c.sweep.kinds.size(); ++i) out << (i ? ", " : "") << to_string(c.sweep.kinds[i]);
  out << '\n';
}

inline nlohmann::json to_json(const RunConfig& c) {
  std::ostringstream ss;
  print_config(ss, c);
  return ss.str();
}

}  // namespace wusn
