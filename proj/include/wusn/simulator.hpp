#pragma once

// Trace-driven evaluation of the learned policy and the queueless
// sense-then-transmit baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "wusn/data_pipeline.hpp"
#include "wusn/error.hpp"
#include "wusn/hmm.hpp"
#include "wusn/mdp.hpp"
#include "wusn/soil_channel.hpp"

namespace wusn {

/// Learned policy acting on the decoded channel state.
struct RlAgent {
  Policy policy;
  GaussianHmm channel;
  // Decode with the offline Viterbi path instead of the causal filter.
  bool genie_state = false;
};

/// Queueless baseline: transmit the new packet once with a fixed modulation.
struct SenseThenTransmit {
  int modulation = 2;
};

using PolicyKind = std::variant<RlAgent, SenseThenTransmit>;

inline std::string kind_label(const PolicyKind& kind) {
  if (const auto* b = std::get_if<SenseThenTransmit>(&kind)) return modulation_name(b->modulation);
  return "RL";
}

struct PeriodRecord {
  std::size_t channel_state = 0;
  Action action;
  int sent = 0;
  int failed = 0;
  int dropped = 0;
  std::size_t queue_after = 0;

  bool operator==(const PeriodRecord&) const = default;
};

struct SimMetrics {
  std::string kind;
  std::size_t queue_capacity = 0;
  std::size_t periods = 0;
  std::size_t initial_queue = 0;
  std::size_t final_queue = 0;
  std::uint64_t generated = 0;
  std::uint64_t successful = 0;
  std::uint64_t unsuccessful_attempts = 0;
  std::uint64_t dropped = 0;
  double energy_metric = 0.0;    // sum of t_sym * P_t * attempts
  double physical_energy = 0.0;  // sum of P_t * t_sym * symbols, J
  std::vector<std::uint32_t> queue_trace;
  std::vector<PeriodRecord> log;

  bool operator==(const SimMetrics&) const = default;
};

struct SimOptions {
  bool record_log = false;
  std::size_t initial_queue = 0;
};

/// Energy spent per delivered packet.
inline double energy_per_success(const SimMetrics& m) {
  require(m.successful > 0, ErrorCode::undefined_ratio, "no successful packets");
  return m.energy_metric / static_cast<double>(m.successful);
}

inline double bit_error_at(const RadioConfig& radio, int modulation, double pl_db) {
  return ber_mpsk(modulation, snr(radio, pl_db));
}

/// Runs one policy over the trace. Each attempted packet succeeds
/// independently with probability (1 - pe)^P_L drawn from a stream seeded
/// by `seed`; pe uses the instantaneous path loss of the period.
inline SimMetrics run(const PathLossTrace& trace, const PolicyKind& kind, const RadioConfig& radio,
                      std::size_t queue_capacity, std::uint64_t seed, const SimOptions& opt = {}) {
  require(trace.size() > 0, ErrorCode::invalid_input, "empty trace");
  require(trace.delta_db.size() == trace.size(), ErrorCode::invalid_input, "trace arrays differ in length");
  radio.validate();

  const auto* agent = std::get_if<RlAgent>(&kind);
  const auto* baseline = std::get_if<SenseThenTransmit>(&kind);
  const std::size_t cap = agent ? queue_capacity : 0;
  if (agent) {
    require(agent->policy.n_channel() == agent->channel.n_states(), ErrorCode::configuration,
            "policy has " + std::to_string(agent->policy.n_channel()) + " channel states, model has " +
                std::to_string(agent->channel.n_states()));
    require(agent->policy.n_queue() == queue_capacity + 1, ErrorCode::configuration,
            "policy covers queue lengths 0.." + std::to_string(agent->policy.n_queue() - 1) +
                ", capacity is " + std::to_string(queue_capacity));
  } else {
    bits_per_symbol(baseline->modulation);
  }
  require(opt.initial_queue <= cap, ErrorCode::configuration, "initial queue above capacity");

  SimMetrics m;
  m.kind = kind_label(kind);
  m.queue_capacity = cap;
  m.periods = trace.size();
  m.initial_queue = opt.initial_queue;
  m.queue_trace.reserve(trace.size());

  std::vector<Vec2> obs;
  std::optional<OnlineFilter> filter;
  std::vector<std::size_t> genie_path;
  if (agent) {
    filter.emplace(agent->channel);
    if (agent->genie_state) {
      obs.reserve(trace.size());
      for (std::size_t t = 0; t < trace.size(); ++t) obs.push_back({trace.pl_db[t], trace.delta_db[t]});
      genie_path = viterbi(agent->channel, obs);
    }
  }

  std::mt19937_64 rng(seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::size_t queue = opt.initial_queue;

  for (std::size_t t = 0; t < trace.size(); ++t) {
    ++m.generated;
    std::size_t state = 0;
    Action a{};
    if (agent) {
      state = agent->genie_state ? genie_path[t] : filter->update({trace.pl_db[t], trace.delta_db[t]});
      a = agent->policy.at(state, queue);
      require(is_valid_modulation(a.modulation) && a.attempts >= 0 &&
                  static_cast<std::size_t>(a.attempts) <= queue + 1,
              ErrorCode::contract_violation, "policy action exceeds available packets");
    } else {
      a = {baseline->modulation, 1};
    }

    const double pe = bit_error_at(radio, a.modulation, trace.pl_db[t]);
    const double p_ok = packet_success_prob(pe, radio.packet_bits);
    int sent = 0;
    for (int k = 0; k < a.attempts; ++k)
      if (uniform() < p_ok) ++sent;
    const int failed = a.attempts - sent;

    m.successful += static_cast<std::uint64_t>(sent);
    m.unsuccessful_attempts += static_cast<std::uint64_t>(failed);
    m.energy_metric += radio.symbol_time_s * radio.tx_power_w * a.attempts;
    m.physical_energy += radio.tx_power_w * radio.symbol_time_s *
                         (static_cast<double>(radio.packet_bits) / bits_per_symbol(a.modulation)) * a.attempts;

    // Failed packets stay queued; whatever exceeds the capacity is dropped
    // oldest-first, which for the queueless baselines is every failure.
    std::size_t backlog = queue + 1 - static_cast<std::size_t>(sent);
    const std::size_t over = backlog > cap ? backlog - cap : 0;
    m.dropped += over;
    backlog -= over;
    queue = backlog;
    m.queue_trace.push_back(static_cast<std::uint32_t>(queue));
    if (opt.record_log) m.log.push_back({state, a, sent, failed, static_cast<int>(over), queue});
  }
  m.final_queue = queue;
  return m;
}

struct OccupancyReport {
  std::size_t max = 0;
  double mean = 0.0;
  double fraction_near_full = 0.0;  // periods with queue >= 0.9 * capacity
};

inline OccupancyReport queue_occupancy_report(const SimMetrics& m) {
  OccupancyReport r;
  if (m.queue_trace.empty() || m.queue_capacity == 0) return r;
  double sum = 0.0;
  std::size_t near_full = 0;
  const double threshold = 0.9 * static_cast<double>(m.queue_capacity);
  for (auto q : m.queue_trace) {
    r.max = std::max<std::size_t>(r.max, q);
    sum += q;
    if (q >= threshold) ++near_full;
  }
  r.mean = sum / static_cast<double>(m.queue_trace.size());
  r.fraction_near_full = static_cast<double>(near_full) / static_cast<double>(m.queue_trace.size());
  return r;
}

// --- sweeps ----------------------------------------------------------------

enum class AgentKind { rl, bpsk, qpsk, psk8 };

inline std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::rl: return "RL";
    case AgentKind::bpsk: return "BPSK";
    case AgentKind::qpsk: return "QPSK";
    case AgentKind::psk8: return "8PSK";
  }
  return "?";
}

inline AgentKind agent_kind_from_string(const std::string& s) {
  if (s == "RL" || s == "rl") return AgentKind::rl;
  if (s == "BPSK" || s == "bpsk") return AgentKind::bpsk;
  if (s == "QPSK" || s == "qpsk") return AgentKind::qpsk;
  if (s == "8PSK" || s == "8psk") return AgentKind::psk8;
  fail(ErrorCode::invalid_config, "unknown policy kind '" + s + "'");
}

struct SweepRow {
  double power_w = 0.0;
  AgentKind kind = AgentKind::rl;
  std::size_t n_q = 0;
  int t_max = 0;
  std::uint64_t seed = 0;
  std::size_t sweeps = 0;  // value-iteration sweeps behind an RL row
  SimMetrics metrics;
};

struct SweepSettings {
  MdpParams mdp;
  double vi_tol = 1e-10;
  std::size_t vi_max_iters = 1000;
  bool genie_state = false;
  unsigned jobs = 1;
};

namespace detail {

// Evaluates tasks in index order with at most `jobs` running concurrently.
template <class Fn>
auto parallel_map(std::size_t count, unsigned jobs, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out(count);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<R>> pending;
  std::size_t next_to_collect = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (pending.size() - next_to_collect >= jobs) {
      out[next_to_collect] = pending[next_to_collect].get();
      ++next_to_collect;
    }
    pending.push_back(std::async(std::launch::async, fn, i));
  }
  for (; next_to_collect < count; ++next_to_collect) out[next_to_collect] = pending[next_to_collect].get();
  return out;
}

inline PolicyKind make_kind(AgentKind k, const Solution* sol, const GaussianHmm& channel, bool genie) {
  switch (k) {
    case AgentKind::rl: return RlAgent{sol->policy, channel, genie};
    case AgentKind::bpsk: return SenseThenTransmit{2};
    case AgentKind::qpsk: return SenseThenTransmit{4};
    case AgentKind::psk8: return SenseThenTransmit{8};
  }
  return SenseThenTransmit{2};
}

}  // namespace detail

/// One run per (power, kind), power-major. The RL policy is re-solved at
/// every power because the bit error table depends on P_t. Run i uses
/// seed ^ i.
inline std::vector<SweepRow> run_power_sweep(const PathLossTrace& trace, const GaussianHmm& channel,
                                             const std::vector<AgentKind>& kinds,
                                             const std::vector<double>& powers, const RadioConfig& radio,
                                             const SweepSettings& settings, std::uint64_t seed) {
  require(!powers.empty(), ErrorCode::invalid_config, "power sweep needs at least one power");
  for (double p : powers) require(p > 0 && std::isfinite(p), ErrorCode::invalid_config, "powers must be positive");
  const bool needs_rl = std::find(kinds.begin(), kinds.end(), AgentKind::rl) != kinds.end();

  std::vector<std::optional<Solution>> solved(powers.size());
  if (needs_rl) {
    auto sols = detail::parallel_map(powers.size(), settings.jobs, [&](std::size_t i) {
      RadioConfig r = radio;
      r.tx_power_w = powers[i];
      return value_iteration(build_model(channel, r, settings.mdp), settings.vi_tol, settings.vi_max_iters);
    });
    for (std::size_t i = 0; i < powers.size(); ++i) solved[i] = std::move(sols[i]);
  }

  return detail::parallel_map(powers.size() * kinds.size(), settings.jobs, [&](std::size_t idx) {
    const std::size_t pi = idx / kinds.size();
    const AgentKind k = kinds[idx % kinds.size()];
    RadioConfig r = radio;
    r.tx_power_w = powers[pi];
    SweepRow row;
    row.power_w = powers[pi];
    row.kind = k;
    row.seed = seed ^ static_cast<std::uint64_t>(idx);
    const Solution* sol = solved[pi] ? &*solved[pi] : nullptr;
    if (k == AgentKind::rl) {
      row.n_q = settings.mdp.queue_capacity;
      row.t_max = settings.mdp.t_max;
      row.sweeps = sol->sweeps;
    }
    row.metrics = run(trace, detail::make_kind(k, sol, channel, settings.genie_state), r,
                      settings.mdp.queue_capacity, row.seed);
    return row;
  });
}

/// Queue-capacity sweep of the RL policy with t_max = ceil(0.1 * N_q). Run i
/// uses seed ^ i.
inline std::vector<SweepRow> run_queue_sweep(const PathLossTrace& trace, const GaussianHmm& channel,
                                             const std::vector<std::size_t>& queue_sizes,
                                             const RadioConfig& radio, const SweepSettings& settings,
                                             std::uint64_t seed) {
  require(!queue_sizes.empty(), ErrorCode::invalid_config, "queue sweep needs at least one size");
  for (auto nq : queue_sizes) require(nq >= 1, ErrorCode::invalid_config, "queue sizes must be >= 1");
  return detail::parallel_map(queue_sizes.size(), settings.jobs, [&](std::size_t i) {
    MdpParams params = settings.mdp;
    params.queue_capacity = queue_sizes[i];
    params.t_max = static_cast<int>((queue_sizes[i] + 9) / 10);
    const Solution sol = value_iteration(build_model(channel, radio, params), settings.vi_tol, settings.vi_max_iters);
    SweepRow row;
    row.power_w = radio.tx_power_w;
    row.kind = AgentKind::rl;
    row.n_q = params.queue_capacity;
    row.t_max = params.t_max;
    row.seed = seed ^ static_cast<std::uint64_t>(i);
    row.sweeps = sol.sweeps;
    row.metrics = run(trace, RlAgent{sol.policy, channel, settings.genie_state}, radio, params.queue_capacity, row.seed);
    return row;
  });
}

// --- serialization ---------------------------------------------------------

inline void write_metrics_csv_header(std::ostream& out) {
  out << "power_w,kind,n_q,t_max,generated,successful,unsuccessful,dropped,energy_metric,energy_ratio,max_queue\n";
}

inline void write_metrics_csv_row(std::ostream& out, double power_w, const std::string& kind, std::size_t n_q,
                                  int t_max, const SimMetrics& m) {
  out << detail::format_double(power_w) << ',' << kind << ',' << n_q << ',' << t_max << ',' << m.generated << ','
      << m.successful << ',' << m.unsuccessful_attempts << ',' << m.dropped << ','
      << detail::format_double(m.energy_metric) << ',';
  if (m.successful > 0) out << detail::format_double(energy_per_success(m));
  out << ',' << queue_occupancy_report(m).max << '\n';
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  write_metrics_csv_header(out);
  for (const auto& r : rows) write_metrics_csv_row(out, r.power_w, to_string(r.kind), r.n_q, r.t_max, r.metrics);
}

inline nlohmann::json to_json(const OccupancyReport& r) {
  return {{"max", r.max}, {"mean", r.mean}, {"fraction_near_full", r.fraction_near_full}};
}

inline nlohmann::json to_json(const SimMetrics& m) {
  nlohmann::json j{{"kind", m.kind},
                   {"queue_capacity", m.queue_capacity},
                   {"periods", m.periods},
                   {"generated", m.generated},
                   {"successful", m.successful},
                   {"unsuccessful", m.unsuccessful_attempts},
                   {"dropped", m.dropped},
                   {"initial_queue", m.initial_queue},
                   {"final_queue", m.final_queue},
                   {"energy_metric", m.energy_metric},
                   {"physical_energy_j", m.physical_energy},
                   {"occupancy", to_json(queue_occupancy_report(m))}};
  j["energy_ratio"] = m.successful > 0 ? nlohmann::json(energy_per_success(m)) : nlohmann::json();
  return j;
}

}  // namespace wusn
