#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "wusn/mdp.hpp"

using namespace wusn;

namespace {

// Failure-count distribution by convolving one Bernoulli per attempt.
std::vector<double> failures_by_convolution(int n, double p_fail) {
  std::vector<double> dist{1.0};
  for (int k = 0; k < n; ++k) {
    std::vector<double> next(dist.size() + 1, 0.0);
    for (std::size_t j = 0; j < dist.size(); ++j) {
      next[j] += dist[j] * (1 - p_fail);
      next[j + 1] += dist[j] * p_fail;
    }
    dist = std::move(next);
  }
  return dist;
}

std::vector<double> queue_oracle(std::size_t q1, int n, double p_fail, std::size_t cap) {
  const auto f = failures_by_convolution(n, p_fail);
  std::vector<double> out(cap + 1, 0.0);
  for (int nu = 0; nu <= n; ++nu) {
    long long q = static_cast<long long>(q1) + 1 - (n - nu);
    q = std::clamp<long long>(q, 0, static_cast<long long>(cap));
    out[static_cast<std::size_t>(q)] += f[static_cast<std::size_t>(nu)];
  }
  return out;
}

MdpModel uniform_model(std::size_t n_channel, const std::vector<std::array<double, 3>>& pe, MdpParams params) {
  MdpModel m;
  m.n_channel = n_channel;
  m.channel_trans.assign(n_channel * n_channel, 1.0 / static_cast<double>(n_channel));
  m.pe_table = pe;
  for (std::size_t c = 0; c < n_channel; ++c) m.state_pl_db.push_back(80.0 + static_cast<double>(c));
  m.params = params;
  return m;
}

GaussianHmm ladder_hmm(std::size_t n, double lo, double hi) {
  GaussianHmm h;
  h.initial.assign(n, 1.0 / static_cast<double>(n));
  h.trans.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    h.means.push_back({lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n - 1, 1)), 0.0});
    h.covs.push_back({1.0, 0.0, 0.1});
    for (std::size_t j = 0; j < n; ++j) {
      const double d = std::abs(static_cast<double>(i) - static_cast<double>(j));
      h.trans[i * n + j] = i == j ? 0.0 : std::exp(-d);
    }
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j) off += h.trans[i * n + j];
    for (std::size_t j = 0; j < n; ++j) h.trans[i * n + j] = n == 1 ? 1.0 : h.trans[i * n + j] / off * 0.1;
    if (n > 1) h.trans[i * n + i] = 0.9;
  }
  return h;
}

double pe_for_failure(double p_fail, int bits) { return 1.0 - std::pow(1.0 - p_fail, 1.0 / bits); }

}  // namespace

TEST(Actions, FeasibilityLimits) {
  auto max_n = [](std::size_t q1, int m, int t_max) {
    int best = -1;
    for (const auto& a : feasible_actions(q1, t_max))
      if (a.modulation == m) best = std::max(best, a.attempts);
    return best;
  };
  EXPECT_EQ(max_n(100, 8, 15), 45);
  EXPECT_EQ(max_n(20, 2, 15), 15);
  EXPECT_EQ(max_n(20, 4, 15), 21);
  EXPECT_EQ(max_n(0, 8, 15), 1);
  EXPECT_EQ(max_packets(8, 15), 45);
  EXPECT_FALSE(is_feasible(3, {8, 5}, 15));
  EXPECT_FALSE(is_feasible(3, {16, 1}, 15));
  EXPECT_TRUE(is_feasible(3, {4, 4}, 15));
  const auto acts = feasible_actions(5, 2);
  EXPECT_TRUE(std::is_sorted(acts.begin(), acts.end()));
}

TEST(QueueKernel, BinomialExample) {
  MdpParams p;
  const auto d = queue_transition(4, {2, 2}, pe_for_failure(0.3, 1000), p, 1000);
  EXPECT_NEAR(d[3], 0.49, 1e-12);
  EXPECT_NEAR(d[4], 0.42, 1e-12);
  EXPECT_NEAR(d[5], 0.09, 1e-12);
}

TEST(QueueKernel, ExhaustiveAgainstConvolutionOracle) {
  MdpParams p;
  for (double pe : {0.0, 1e-5, 1e-3, 0.5}) {
    const double p_fail = 1.0 - packet_success_prob(pe, 1000);
    for (std::size_t q1 = 0; q1 <= p.queue_capacity; ++q1)
      for (const auto& a : feasible_actions(q1, p.t_max)) {
        const auto d = queue_transition(q1, a, pe, p, 1000);
        const auto o = queue_oracle(q1, a.attempts, p_fail, p.queue_capacity);
        double sum = 0.0;
        for (std::size_t k = 0; k < d.size(); ++k) {
          sum += d[k];
          ASSERT_NEAR(d[k], o[k], 1e-12) << "q1 " << q1 << " n " << a.attempts << " pe " << pe;
        }
        ASSERT_NEAR(sum, 1.0, 1e-12);
      }
  }
}

TEST(QueueKernel, OverflowAndContract) {
  MdpParams p;
  p.queue_capacity = 3;
  const auto d = queue_transition(3, {2, 0}, 0.0, p, 1000);
  EXPECT_EQ(d[3], 1.0);
  EXPECT_THROW(queue_transition(4, {2, 0}, 0.0, p, 1000), Error);
  EXPECT_THROW(queue_transition(1, {2, 3}, 0.0, p, 1000), Error);
}

TEST(Reward, IdleIsZero) { EXPECT_EQ(expected_reward(10, {8, 0}, 0.2, MdpParams{}, RadioConfig{}), 0.0); }

TEST(Reward, EmptyingTheQueueAtZeroError) {
  const RadioConfig r;
  for (int m : {2, 4, 8})
    for (std::size_t q1 : {0u, 3u, 14u})
      EXPECT_NEAR(expected_reward(q1, {m, static_cast<int>(q1) + 1}, 0.0, MdpParams{}, r),
                  bits_per_symbol(m) / (r.symbol_time_s * r.tx_power_w), 1e-6);
}

TEST(Reward, MonteCarloAgreement) {
  const RadioConfig r;
  const MdpParams p;
  const double pe = pe_for_failure(0.5, r.packet_bits);
  const double value = expected_reward(1, {2, 2}, pe, p, r);
  EXPECT_NEAR(value, -300000.0, 1e-6);

  std::mt19937_64 rng(1);
  std::bernoulli_distribution fails(0.5);
  const int draws = 10000000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < draws; ++k) {
    const int nu = fails(rng) + fails(rng);
    const int nt = 2 - nu;
    const double score = nt - p.alpha1 * nu - p.alpha2 * (1.0 - nt + 1.0);
    const double rew = score * 1.0 / (r.symbol_time_s * r.tx_power_w * 2.0);
    sum += rew;
    sum2 += rew * rew;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
  EXPECT_LE(std::abs(mean - value), 3 * se);
}

TEST(Reward, NegativeWhenFailuresDominate) {
  MdpParams p;
  p.alpha2 = 0.0;
  const RadioConfig r;
  for (double pf : {0.51, 0.7, 0.99})
    for (int m : {2, 4, 8})
      for (int n = 1; n <= 12; ++n) EXPECT_LT(expected_reward(20, {m, n}, pe_for_failure(pf, r.packet_bits), p, r), 0.0);
}

TEST(Model, BuildFromHmm) {
  const auto one = build_model(ladder_hmm(1, 90, 90), RadioConfig{}, MdpParams{});
  EXPECT_EQ(one.channel_trans, std::vector<double>{1.0});
  const auto full = build_model(ladder_hmm(15, 80, 104), RadioConfig{}, MdpParams{});
  EXPECT_EQ(full.n_channel * full.n_queue(), 15u * 151u);
  for (std::size_t mi = 0; mi < 3; ++mi)
    for (std::size_t c = 1; c < 15; ++c) EXPECT_GE(full.pe_table[c][mi], full.pe_table[c - 1][mi]);
  for (std::size_t c = 0; c < 15; ++c) {
    EXPECT_LE(full.pe_table[c][0], full.pe_table[c][1]);
    EXPECT_LE(full.pe_table[c][1], full.pe_table[c][2]);
  }
}

TEST(ValueIteration, TwoQueueStatesMatchPolicyEnumeration) {
  MdpParams p;
  p.queue_capacity = 1;
  p.t_max = 1;
  p.discount = 0.6;
  const RadioConfig r;
  auto model = uniform_model(1, {{pe_for_failure(0.1, 1000), pe_for_failure(0.3, 1000), pe_for_failure(0.6, 1000)}}, p);
  model.radio = r;
  const auto sol = value_iteration(model, 1e-9, 10000);

  // Every deterministic policy solves (I - lambda P) v = r in closed form;
  // the optimum dominates all of them.
  const auto a0 = feasible_actions(0, p.t_max), a1 = feasible_actions(1, p.t_max);
  double best0 = -std::numeric_limits<double>::infinity(), best1 = best0;
  for (const auto& x : a0)
    for (const auto& y : a1) {
      const auto P0 = queue_transition(0, x, model.pe(0, x.modulation), p, r.packet_bits);
      const auto P1 = queue_transition(1, y, model.pe(0, y.modulation), p, r.packet_bits);
      const double r0 = expected_reward(0, x, model.pe(0, x.modulation), p, r);
      const double r1 = expected_reward(1, y, model.pe(0, y.modulation), p, r);
      const double l = p.discount;
      const double m00 = 1 - l * P0[0], m01 = -l * P0[1], m10 = -l * P1[0], m11 = 1 - l * P1[1];
      const double det = m00 * m11 - m01 * m10;
      const double v0 = (r0 * m11 - m01 * r1) / det, v1 = (m00 * r1 - m10 * r0) / det;
      best0 = std::max(best0, v0);
      best1 = std::max(best1, v1);
    }
  EXPECT_NEAR(sol.values.at(0, 0), best0, 1e-6 * std::abs(best0));
  EXPECT_NEAR(sol.values.at(0, 1), best1, 1e-6 * std::abs(best1));
}

TEST(ValueIteration, AbsorbingGeometricSeries) {
  // Error-free link: the best action always empties the queue, so
  // V = r / (1 - lambda) with r = log2(8) / (t_sym * P_t).
  MdpParams p;
  p.queue_capacity = 1;
  p.t_max = 1;
  const RadioConfig r;
  auto model = uniform_model(1, {{0.0, 0.0, 0.0}}, p);
  model.radio = r;
  const auto sol = value_iteration(model);
  const double reward = 3.0 / (r.symbol_time_s * r.tx_power_w);
  EXPECT_NEAR(sol.values.at(0, 0), reward / (1 - p.discount), 1e-9 * reward);
  EXPECT_EQ(sol.policy.at(0, 0), (Action{8, 1}));
  EXPECT_EQ(sol.policy.at(0, 1), (Action{8, 2}));
}

TEST(ValueIteration, ContractionAndFixedPoint) {
  const auto model = build_model(ladder_hmm(6, 85, 102), RadioConfig{}, MdpParams{});
  const auto sol = value_iteration(model);
  double vmax = 0.0;
  for (double v : sol.values.data()) vmax = std::max(vmax, std::abs(v));
  // Contraction up to a few ulps of rounding per sweep.
  const double delta = 16 * std::numeric_limits<double>::epsilon() * vmax;
  for (std::size_t k = 1; k < sol.residuals.size(); ++k)
    EXPECT_LE(sol.residuals[k], (0.1 + 1e-6) * sol.residuals[k - 1] + delta) << k;
  EXPECT_LT(sol.residuals.back(), 1e-10);
  EXPECT_LE(sol.sweeps, 50u);
  EXPECT_EQ(greedy_policy(model, sol.values), sol.policy);
  for (std::size_t c = 0; c < model.n_channel; ++c)
    for (std::size_t q = 0; q < model.n_queue(); ++q) EXPECT_TRUE(is_feasible(q, sol.policy.at(c, q), 15));
}

TEST(ValueIteration, PlateauThenDecline) {
  // p_fail <= 1e-12 everywhere. A state q1 can clear q1 + 1 packets while
  // q1 + 1 <= 45, so the value is flat up to q1 = 44 and falls beyond it.
  const MdpParams p;
  auto model = uniform_model(3, std::vector<std::array<double, 3>>(3, {1e-16, 1e-16, 1e-16}), p);
  const auto sol = value_iteration(model);
  for (std::size_t c = 0; c < 3; ++c) {
    const double v0 = sol.values.at(c, 0);
    for (std::size_t q = 0; q + 1 < static_cast<std::size_t>(max_packets(8, p.t_max)); ++q)
      EXPECT_LE(std::abs(sol.values.at(c, q) - v0), 1e-6 * std::abs(v0)) << q;
    for (std::size_t q = 44; q < p.queue_capacity; ++q) EXPECT_LT(sol.values.at(c, q + 1), sol.values.at(c, q)) << q;
    // Best channel, queue at N_pmax: send as many as the slots allow.
    EXPECT_EQ(sol.policy.at(c, 45), (Action{8, 45}));
    EXPECT_EQ(sol.policy.at(c, 10), (Action{8, 11}));
  }
}

TEST(ValueIteration, ConvergenceErrorCarriesResidual) {
  const auto model = build_model(ladder_hmm(3, 85, 100), RadioConfig{}, MdpParams{});
  try {
    value_iteration(model, 1e-10, 2);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::convergence_failure);
    EXPECT_EQ(e.sweeps(), 2u);
    EXPECT_GT(e.residual(), 1e-10);
  }
}

TEST(Policy, StoreLookupAndBounds) {
  Policy pol(2, 3);
  pol.set(1, 2, {4, 3});
  EXPECT_EQ(policy_lookup(pol, 1, 2), (Action{4, 3}));
  EXPECT_THROW(pol.at(2, 0), Error);
  EXPECT_THROW(pol.set(0, 3, {2, 1}), Error);
}

TEST(Policy, JsonRoundTrip) {
  const auto h = ladder_hmm(4, 85, 100);
  MdpParams p;
  p.queue_capacity = 20;
  p.t_max = 2;
  const auto model = build_model(h, RadioConfig{}, p);
  const auto sol = value_iteration(model);
  const auto doc = policy_from_json(nlohmann::json::parse(to_json(sol, model, h).dump()));
  EXPECT_EQ(doc.solution.policy, sol.policy);
  EXPECT_EQ(doc.solution.values.data(), sol.values.data());
  EXPECT_EQ(doc.solution.residuals, sol.residuals);
  EXPECT_EQ(doc.channel, h);
  EXPECT_EQ(doc.model.pe_table, model.pe_table);
  EXPECT_EQ(doc.model.params.queue_capacity, 20u);

  auto bad = to_json(sol, model, h);
  bad["attempts"][0] = 99;
  EXPECT_THROW(policy_from_json(bad), Error);
  bad = to_json(sol, model, h);
  bad["n_queue"] = 5;
  EXPECT_THROW(policy_from_json(bad), Error);
}
