#pragma once

// Joint (channel state x queue length) decision process and its value
// iteration solver.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wusn/error.hpp"
#include "wusn/hmm.hpp"
#include "wusn/soil_channel.hpp"

namespace wusn {

inline constexpr std::array<int, 3> modulation_orders{2, 4, 8};

inline std::size_t modulation_index(int order) {
  switch (order) {
    case 2: return 0;
    case 4: return 1;
    case 8: return 2;
    default:
      fail(ErrorCode::invalid_modulation, "modulation order " + std::to_string(order) + " not in {2, 4, 8}");
  }
}

/// Slots per period carry t_max BPSK, 2*t_max QPSK or 3*t_max 8PSK packets.
inline int max_packets(int order, int t_max) { return t_max * bits_per_symbol(order); }

struct Action {
  int modulation = 2;
  int attempts = 0;

  auto operator<=>(const Action&) const = default;
};

struct MdpParams {
  std::size_t queue_capacity = 150;
  int t_max = 15;
  double alpha1 = 1.0;    // weight on unsuccessful attempts
  double alpha2 = 0.1;    // weight on packets left queued
  double discount = 0.1;

  void validate() const {
    require(t_max >= 1, ErrorCode::invalid_config, "t_max must be >= 1");
    require(discount >= 0 && discount < 1, ErrorCode::invalid_config, "discount must lie in [0, 1)");
    require(std::isfinite(alpha1) && std::isfinite(alpha2), ErrorCode::invalid_config,
            "reward coefficients must be finite");
  }
};

/// Feasible actions at queue length q1, ordered by (modulation, attempts).
/// The packet sensed this period may go out immediately, hence q1 + 1.
inline std::vector<Action> feasible_actions(std::size_t q1, int t_max) {
  std::vector<Action> out;
  for (int m : modulation_orders) {
    const auto limit = std::min<long long>(static_cast<long long>(q1) + 1, max_packets(m, t_max));
    for (int n = 0; n <= limit; ++n) out.push_back({m, n});
  }
  return out;
}

inline bool is_feasible(std::size_t q1, const Action& a, int t_max) {
  return is_valid_modulation(a.modulation) && a.attempts >= 0 &&
         a.attempts <= std::min<long long>(static_cast<long long>(q1) + 1, max_packets(a.modulation, t_max));
}

/// Binomial(n, p) probability mass over 0..n.
inline std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
  if (p <= 0.0) {
    pmf.front() = 1.0;
    return pmf;
  }
  if (p >= 1.0) {
    pmf.back() = 1.0;
    return pmf;
  }
  const double lp = std::log(p), lq = std::log1p(-p);
  const double lgn = std::lgamma(n + 1.0);
  for (int k = 0; k <= n; ++k)
    pmf[static_cast<std::size_t>(k)] =
        std::exp(lgn - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * lp + (n - k) * lq);
  return pmf;
}

namespace detail {

// Accumulates the next-queue distribution given the failure-count pmf.
inline void queue_distribution(std::size_t q1, int attempts, const std::vector<double>& fail_pmf,
                               std::size_t capacity, std::vector<double>& out) {
  out.assign(capacity + 1, 0.0);
  for (int nu = 0; nu <= attempts; ++nu) {
    const long long raw = static_cast<long long>(q1) + 1 - (attempts - nu);
    const auto q = static_cast<std::size_t>(std::clamp<long long>(raw, 0, static_cast<long long>(capacity)));
    out[q] += fail_pmf[static_cast<std::size_t>(nu)];
  }
}

}  // namespace detail

/// Distribution of the next queue length. Unsuccessful packets are re-queued;
/// overflow beyond the capacity drops the oldest packets.
inline std::vector<double> queue_transition(std::size_t q1, const Action& a, double pe,
                                            const MdpParams& params, int packet_bits) {
  require(q1 <= params.queue_capacity, ErrorCode::contract_violation, "queue length above capacity");
  require(is_feasible(q1, a, params.t_max), ErrorCode::contract_violation,
          "action (" + std::to_string(a.modulation) + ", " + std::to_string(a.attempts) +
              ") infeasible at queue length " + std::to_string(q1));
  const double p_fail = 1.0 - packet_success_prob(pe, packet_bits);
  std::vector<double> out;
  detail::queue_distribution(q1, a.attempts, binomial_pmf(a.attempts, p_fail), params.queue_capacity, out);
  return out;
}

/// Expected per-period reward. Linear in the failure count, so the
/// expectation is exact through E[N_u] = n * p_fail.
inline double expected_reward(std::size_t q1, const Action& a, double pe, const MdpParams& params,
                              const RadioConfig& radio) {
  require(is_feasible(q1, a, params.t_max), ErrorCode::contract_violation, "infeasible action");
  if (a.attempts == 0) return 0.0;
  const double n = a.attempts;
  const double p_fail = 1.0 - packet_success_prob(pe, radio.packet_bits);
  const double failed = n * p_fail;
  const double sent = n - failed;
  const double score = sent - params.alpha1 * failed - params.alpha2 * (static_cast<double>(q1) - sent + 1.0);
  return score * bits_per_symbol(a.modulation) / (radio.symbol_time_s * radio.tx_power_w * n);
}

struct MdpModel {
  std::size_t n_channel = 0;
  std::vector<double> channel_trans;               // row-major n_channel^2
  std::vector<std::array<double, 3>> pe_table;     // per state, per modulation index
  std::vector<double> state_pl_db;                 // mean path loss used for pe_table
  MdpParams params;
  RadioConfig radio;

  std::size_t n_queue() const { return params.queue_capacity + 1; }
  double pe(std::size_t c, int order) const { return pe_table[c][modulation_index(order)]; }

  void validate() const {
    params.validate();
    radio.validate();
    require(n_channel >= 1 && channel_trans.size() == n_channel * n_channel &&
                pe_table.size() == n_channel,
            ErrorCode::invalid_input, "model dimensions inconsistent");
    for (std::size_t i = 0; i < n_channel; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n_channel; ++j) sum += channel_trans[i * n_channel + j];
      require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::invalid_input, "channel transitions not stochastic");
      for (double p : pe_table[i])
        require(p >= 0 && p <= 1, ErrorCode::invalid_input, "bit error outside [0, 1]");
    }
  }
};

/// Per-state bit error rates come from each state's mean path loss.
inline MdpModel build_model(const GaussianHmm& h, const RadioConfig& radio, const MdpParams& params) {
  h.validate();
  radio.validate();
  params.validate();
  MdpModel m;
  m.n_channel = h.n_states();
  m.channel_trans = h.trans;
  m.params = params;
  m.radio = radio;
  for (const Vec2& mean : h.means) {
    const double gain = snr(radio, mean[0]);
    m.state_pl_db.push_back(mean[0]);
    m.pe_table.push_back({ber_mpsk(2, gain), ber_mpsk(4, gain), ber_mpsk(8, gain)});
  }
  return m;
}

class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(std::size_t n_channel, std::size_t n_queue, double fill = 0.0)
      : n_channel_(n_channel), n_queue_(n_queue), v_(n_channel * n_queue, fill) {}

  double& at(std::size_t c, std::size_t q) { return v_[c * n_queue_ + q]; }
  double at(std::size_t c, std::size_t q) const { return v_[c * n_queue_ + q]; }
  std::size_t n_channel() const { return n_channel_; }
  std::size_t n_queue() const { return n_queue_; }
  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

 private:
  std::size_t n_channel_ = 0, n_queue_ = 0;
  std::vector<double> v_;
};

class Policy {
 public:
  Policy() = default;
  Policy(std::size_t n_channel, std::size_t n_queue, Action fill = {})
      : n_channel_(n_channel), n_queue_(n_queue), a_(n_channel * n_queue, fill) {}

  const Action& at(std::size_t c, std::size_t q) const {
    check(c, q);
    return a_[c * n_queue_ + q];
  }
  void set(std::size_t c, std::size_t q, const Action& a) {
    check(c, q);
    a_[c * n_queue_ + q] = a;
  }
  std::size_t n_channel() const { return n_channel_; }
  std::size_t n_queue() const { return n_queue_; }
  bool operator==(const Policy&) const = default;

 private:
  void check(std::size_t c, std::size_t q) const {
    require(c < n_channel_ && q < n_queue_, ErrorCode::contract_violation,
            "policy index (" + std::to_string(c) + ", " + std::to_string(q) + ") out of range");
  }

  std::size_t n_channel_ = 0, n_queue_ = 0;
  std::vector<Action> a_;
};

inline Action policy_lookup(const Policy& p, std::size_t c, std::size_t q1) { return p.at(c, q1); }

/// Bellman backup tables for one model: rewards and failure pmfs per
/// (channel state, action), shared by every queue length.
class BellmanOperator {
 public:
  explicit BellmanOperator(const MdpModel& model) : model_(&model) {
    model.validate();
    const auto& p = model.params;
    fail_pmf_.resize(model.n_channel);
    for (std::size_t c = 0; c < model.n_channel; ++c) {
      for (std::size_t mi = 0; mi < 3; ++mi) {
        const int order = modulation_orders[mi];
        const double p_fail = 1.0 - packet_success_prob(model.pe_table[c][mi], model.radio.packet_bits);
        auto& per_n = fail_pmf_[c][mi];
        for (int n = 0; n <= max_packets(order, p.t_max); ++n) per_n.push_back(binomial_pmf(n, p_fail));
      }
    }
  }

  const MdpModel& model() const { return *model_; }

  /// Sweeps every state once from `v`, writing the backed-up values and the
  /// greedy action. Ties keep the earlier action in (modulation, attempts) order.
  void sweep(const ValueTable& v, ValueTable& next, Policy& greedy) const {
    const MdpModel& m = *model_;
    const std::size_t nc = m.n_channel, nq = m.n_queue();
    // Expected continuation value per (c, q') after the channel moves.
    std::vector<double> cont(nc * nq, 0.0);
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t c2 = 0; c2 < nc; ++c2) {
        const double pc = m.channel_trans[c * nc + c2];
        if (pc == 0.0) continue;
        for (std::size_t q = 0; q < nq; ++q) cont[c * nq + q] += pc * v.at(c2, q);
      }
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t q = 0; q < nq; ++q) {
        double best = -std::numeric_limits<double>::infinity();
        Action best_a{};
        for (std::size_t mi = 0; mi < 3; ++mi) {
          const int order = modulation_orders[mi];
          const int limit = static_cast<int>(
              std::min<long long>(static_cast<long long>(q) + 1, max_packets(order, m.params.t_max)));
          for (int n = 0; n <= limit; ++n) {
            const double value = q_value(c, q, mi, n, cont);
            if (value > best) {
              best = value;
              best_a = {order, n};
            }
          }
        }
        next.at(c, q) = best;
        greedy.set(c, q, best_a);
      }
    }
  }

  double reward(std::size_t c, std::size_t q, const Action& a) const {
    return expected_reward(q, a, model_->pe(c, a.modulation), model_->params, model_->radio);
  }

 private:
  double q_value(std::size_t c, std::size_t q, std::size_t mi, int n, const std::vector<double>& cont) const {
    const MdpModel& m = *model_;
    const std::size_t nq = m.n_queue();
    const auto& pmf = fail_pmf_[c][mi][static_cast<std::size_t>(n)];
    double future = 0.0;
    const long long cap = static_cast<long long>(m.params.queue_capacity);
    for (int nu = 0; nu <= n; ++nu) {
      const double w = pmf[static_cast<std::size_t>(nu)];
      if (w == 0.0) continue;
      const long long raw = static_cast<long long>(q) + 1 - (n - nu);
      future += w * cont[c * nq + static_cast<std::size_t>(std::clamp<long long>(raw, 0, cap))];
    }
    return reward(c, q, {modulation_orders[mi], n}) + m.params.discount * future;
  }

  const MdpModel* model_;
  std::vector<std::array<std::vector<std::vector<double>>, 3>> fail_pmf_;
};

struct Solution {
  ValueTable values;
  Policy policy;
  std::vector<double> residuals;  // sup-norm change per sweep
  std::size_t sweeps = 0;
};

inline double sup_norm_diff(const ValueTable& a, const ValueTable& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) r = std::max(r, std::abs(a.data()[i] - b.data()[i]));
  return r;
}

/// Jacobi value iteration from V = 0 until the sup-norm change drops below tol.
inline Solution value_iteration(const MdpModel& model, double tol = 1e-10, std::size_t max_iters = 1000) {
  require(tol > 0, ErrorCode::invalid_input, "tolerance must be positive");
  const BellmanOperator op(model);
  Solution s;
  s.values = ValueTable(model.n_channel, model.n_queue());
  s.policy = Policy(model.n_channel, model.n_queue());
  ValueTable next(model.n_channel, model.n_queue());
  double residual = std::numeric_limits<double>::infinity();
  while (s.sweeps < max_iters) {
    op.sweep(s.values, next, s.policy);
    residual = sup_norm_diff(next, s.values);
    std::swap(s.values, next);
    ++s.sweeps;
    s.residuals.push_back(residual);
    if (residual < tol) return s;
  }
  throw ConvergenceError(residual, s.sweeps);
}

/// Greedy policy with respect to a given value table.
inline Policy greedy_policy(const MdpModel& model, const ValueTable& v) {
  const BellmanOperator op(model);
  ValueTable next(model.n_channel, model.n_queue());
  Policy p(model.n_channel, model.n_queue());
  op.sweep(v, next, p);
  return p;
}

// --- serialization ---------------------------------------------------------

inline constexpr const char* policy_format = "wusn.policy";
inline constexpr int policy_format_version = 1;

inline nlohmann::json to_json(const MdpParams& p) {
  return {{"queue_capacity", p.queue_capacity}, {"t_max", p.t_max}, {"alpha1", p.alpha1},
          {"alpha2", p.alpha2}, {"discount", p.discount}};
}

inline nlohmann::json to_json(const RadioConfig& r) {
  return {{"tx_power_w", r.tx_power_w}, {"noise_w", r.noise_w}, {"symbol_time_s", r.symbol_time_s},
          {"packet_bits", r.packet_bits}};
}

inline MdpParams mdp_params_from_json(const nlohmann::json& j) {
  MdpParams p;
  p.queue_capacity = j.at("queue_capacity").get<std::size_t>();
  p.t_max = j.at("t_max").get<int>();
  p.alpha1 = j.at("alpha1").get<double>();
  p.alpha2 = j.at("alpha2").get<double>();
  p.discount = j.at("discount").get<double>();
  return p;
}

inline RadioConfig radio_from_json(const nlohmann::json& j) {
  RadioConfig r;
  r.tx_power_w = j.at("tx_power_w").get<double>();
  r.noise_w = j.at("noise_w").get<double>();
  r.symbol_time_s = j.at("symbol_time_s").get<double>();
  r.packet_bits = j.at("packet_bits").get<int>();
  return r;
}

/// Policy document: dimensions, row-major actions and values, the model
/// parameters used, and the channel model needed to act on it.
inline nlohmann::json to_json(const Solution& s, const MdpModel& m, const GaussianHmm& channel) {
  nlohmann::json modulation = nlohmann::json::array(), attempts = nlohmann::json::array();
  for (std::size_t c = 0; c < s.policy.n_channel(); ++c)
    for (std::size_t q = 0; q < s.policy.n_queue(); ++q) {
      modulation.push_back(s.policy.at(c, q).modulation);
      attempts.push_back(s.policy.at(c, q).attempts);
    }
  nlohmann::json pe = nlohmann::json::array();
  for (const auto& row : m.pe_table) pe.push_back(row);
  return {{"format", policy_format},
          {"version", policy_format_version},
          {"n_channel", s.policy.n_channel()},
          {"n_queue", s.policy.n_queue()},
          {"modulation", modulation},
          {"attempts", attempts},
          {"values", s.values.data()},
          {"sweeps", s.sweeps},
          {"residuals", s.residuals},
          {"model",
           {{"params", to_json(m.params)},
            {"radio", to_json(m.radio)},
            {"channel_trans", m.channel_trans},
            {"state_pl_db", m.state_pl_db},
            {"pe_table", pe}}},
          {"channel_model", to_json(channel)}};
}

struct PolicyDocument {
  Solution solution;
  MdpModel model;
  GaussianHmm channel;
};

inline PolicyDocument policy_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format").get<std::string>() == policy_format, ErrorCode::schema, "not a policy document");
    require(j.at("version").get<int>() == policy_format_version, ErrorCode::schema,
            "unsupported policy document version");
    PolicyDocument doc;
    const auto nc = j.at("n_channel").get<std::size_t>();
    const auto nq = j.at("n_queue").get<std::size_t>();
    const auto mod = j.at("modulation").get<std::vector<int>>();
    const auto att = j.at("attempts").get<std::vector<int>>();
    auto values = j.at("values").get<std::vector<double>>();
    require(mod.size() == nc * nq && att.size() == nc * nq && values.size() == nc * nq, ErrorCode::schema,
            "policy arrays do not match dimensions");
    doc.solution.policy = Policy(nc, nq);
    doc.solution.values = ValueTable(nc, nq);
    doc.solution.values.data() = std::move(values);
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t q = 0; q < nq; ++q) doc.solution.policy.set(c, q, {mod[c * nq + q], att[c * nq + q]});
    doc.solution.sweeps = j.at("sweeps").get<std::size_t>();
    doc.solution.residuals = j.at("residuals").get<std::vector<double>>();

    const auto& mj = j.at("model");
    doc.model.params = mdp_params_from_json(mj.at("params"));
    doc.model.radio = radio_from_json(mj.at("radio"));
    doc.model.n_channel = nc;
    doc.model.channel_trans = mj.at("channel_trans").get<std::vector<double>>();
    doc.model.state_pl_db = mj.at("state_pl_db").get<std::vector<double>>();
    doc.model.pe_table = mj.at("pe_table").get<std::vector<std::array<double, 3>>>();
    doc.model.validate();
    require(doc.model.n_queue() == nq, ErrorCode::schema, "queue capacity does not match policy");
    doc.channel = hmm_from_json(j.at("channel_model"));
    require(doc.channel.n_states() == nc, ErrorCode::schema, "channel model state count mismatch");
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t q = 0; q < nq; ++q)
        require(is_feasible(q, doc.solution.policy.at(c, q), doc.model.params.t_max), ErrorCode::schema,
                "infeasible action in policy document");
    return doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::schema, std::string("malformed policy document: ") + e.what());
  }
}

}  // namespace wusn
