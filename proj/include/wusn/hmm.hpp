#pragma once

// Hidden Markov model with bivariate Gaussian emissions over
// (path loss, path-loss difference), trained by Baum-Welch.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wusn/error.hpp"

namespace wusn {

using Vec2 = std::array<double, 2>;

/// Symmetric 2x2 matrix.
struct Sym2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  double det() const { return xx * yy - xy * xy; }
  double min_eigenvalue() const {
    const double mean = 0.5 * (xx + yy);
    const double half = std::sqrt(0.25 * (xx - yy) * (xx - yy) + xy * xy);
    return mean - half;
  }
  bool operator==(const Sym2&) const = default;
};

/// Raises every eigenvalue of m to at least floor, leaving larger ones intact.
inline Sym2 floor_eigenvalues(const Sym2& m, double floor) {
  const double mean = 0.5 * (m.xx + m.yy);
  const double half = std::sqrt(0.25 * (m.xx - m.yy) * (m.xx - m.yy) + m.xy * m.xy);
  const double lo = mean - half, hi = mean + half;
  if (lo >= floor) return m;
  if (half == 0.0) return {std::max(m.xx, floor), 0.0, std::max(m.yy, floor)};
  // Eigenvector of the larger eigenvalue.
  double vx = m.xy, vy = hi - m.xx;
  if (std::abs(vx) + std::abs(vy) < 1e-300) {
    vx = hi - m.yy;
    vy = m.xy;
  }
  const double norm = std::hypot(vx, vy);
  vx /= norm;
  vy /= norm;
  const double l1 = std::max(hi, floor), l2 = std::max(lo, floor);
  return {l1 * vx * vx + l2 * vy * vy, (l1 - l2) * vx * vy, l1 * vy * vy + l2 * vx * vx};
}

struct GaussianHmm {
  std::vector<double> initial;
  std::vector<double> trans;  // row-major n x n
  std::vector<Vec2> means;
  std::vector<Sym2> covs;

  std::size_t n_states() const { return initial.size(); }
  double transition(std::size_t from, std::size_t to) const { return trans[from * n_states() + to]; }

  void validate() const {
    const std::size_t n = n_states();
    require(n >= 1, ErrorCode::invalid_input, "model needs at least one state");
    require(trans.size() == n * n && means.size() == n && covs.size() == n, ErrorCode::invalid_input,
            "model dimensions inconsistent");
    auto stochastic = [](std::span<const double> row) {
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) return false;
        sum += p;
      }
      return std::abs(sum - 1.0) <= 1e-9;
    };
    require(stochastic(initial), ErrorCode::invalid_input, "initial distribution not stochastic");
    for (std::size_t i = 0; i < n; ++i)
      require(stochastic(std::span<const double>(trans).subspan(i * n, n)), ErrorCode::invalid_input,
              "transition row " + std::to_string(i) + " not stochastic");
    for (std::size_t i = 0; i < n; ++i) {
      require(std::isfinite(means[i][0]) && std::isfinite(means[i][1]), ErrorCode::invalid_input,
              "non-finite mean");
      require(covs[i].xx > 0 && covs[i].yy > 0 && covs[i].det() > 0, ErrorCode::invalid_input,
              "covariance " + std::to_string(i) + " not positive definite");
    }
  }

  bool operator==(const GaussianHmm&) const = default;
};

inline double log_emission(const GaussianHmm& h, std::size_t state, const Vec2& x) {
  const Sym2& c = h.covs[state];
  const double det = c.det();
  const double dx = x[0] - h.means[state][0];
  const double dy = x[1] - h.means[state][1];
  const double maha = (c.yy * dx * dx - 2.0 * c.xy * dx * dy + c.xx * dy * dy) / det;
  return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * maha;
}

namespace detail {

// Emission likelihoods rescaled by their per-step maximum; returns the log of
// that maximum so callers can restore the scale.
inline double scaled_emissions(const GaussianHmm& h, const Vec2& x, std::span<double> out) {
  const std::size_t n = h.n_states();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = log_emission(h, i, x);
    top = std::max(top, out[i]);
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(out[i] - top);
  return top;
}

inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace detail

/// Scaled-forward log-likelihood of the full sequence.
inline double log_likelihood(const GaussianHmm& h, std::span<const Vec2> obs) {
  const std::size_t n = h.n_states();
  std::vector<double> alpha(n), next(n), b(n);
  double ll = 0.0;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    ll += detail::scaled_emissions(h, obs[t], b);
    double norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double pred = 0.0;
      if (t == 0) {
        pred = h.initial[j];
      } else {
        for (std::size_t i = 0; i < n; ++i) pred += alpha[i] * h.trans[i * n + j];
      }
      next[j] = pred * b[j];
      norm += next[j];
    }
    if (!(norm > 0)) return -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) alpha[j] = next[j] / norm;
    ll += std::log(norm);
  }
  return ll;
}

/// Incremental filtered posterior P(c_t | o_1..o_t).
class OnlineFilter {
 public:
  explicit OnlineFilter(const GaussianHmm& h)
      : h_(&h), posterior_(h.n_states()), scratch_(h.n_states()), b_(h.n_states()) {}

  /// Absorbs one observation and returns the MAP state, lowest index on ties.
  std::size_t update(const Vec2& x) {
    const std::size_t n = h_->n_states();
    detail::scaled_emissions(*h_, x, b_);
    double norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double pred = 0.0;
      if (steps_ == 0) {
        pred = h_->initial[j];
      } else {
        for (std::size_t i = 0; i < n; ++i) pred += posterior_[i] * h_->trans[i * n + j];
      }
      scratch_[j] = pred * b_[j];
      norm += scratch_[j];
    }
    if (norm > 0) {
      for (std::size_t j = 0; j < n; ++j) posterior_[j] = scratch_[j] / norm;
    } else {
      // Observation impossible under the prediction: restart from emissions.
      const double total = std::accumulate(b_.begin(), b_.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) posterior_[j] = b_[j] / total;
    }
    ++steps_;
    return detail::argmax(posterior_);
  }

  std::span<const double> posterior() const { return posterior_; }
  std::size_t steps() const { return steps_; }

 private:
  const GaussianHmm* h_;
  std::vector<double> posterior_, scratch_, b_;
  std::size_t steps_ = 0;
};

inline std::size_t filter_state(const GaussianHmm& h, std::span<const Vec2> obs_prefix) {
  require(!obs_prefix.empty(), ErrorCode::invalid_input, "filtering needs at least one observation");
  OnlineFilter f(h);
  std::size_t state = 0;
  for (const Vec2& x : obs_prefix) state = f.update(x);
  return state;
}

/// Maximum a posteriori state path. Ties resolve to the lowest state index.
inline std::vector<std::size_t> viterbi(const GaussianHmm& h, std::span<const Vec2> obs) {
  require(!obs.empty(), ErrorCode::invalid_input, "viterbi needs at least one observation");
  const std::size_t n = h.n_states(), T = obs.size();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  auto safe_log = [&](double p) { return p > 0 ? std::log(p) : neg_inf; };
  std::vector<double> log_trans(n * n);
  for (std::size_t k = 0; k < n * n; ++k) log_trans[k] = safe_log(h.trans[k]);

  std::vector<double> score(n), next(n);
  std::vector<std::uint32_t> back(T * n, 0);
  for (std::size_t j = 0; j < n; ++j) score[j] = safe_log(h.initial[j]) + log_emission(h, j, obs[0]);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      double best = neg_inf;
      std::uint32_t arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double s = score[i] + log_trans[i * n + j];
        if (s > best) {
          best = s;
          arg = static_cast<std::uint32_t>(i);
        }
      }
      next[j] = best + log_emission(h, j, obs[t]);
      back[t * n + j] = arg;
    }
    score.swap(next);
  }
  std::vector<std::size_t> path(T);
  path[T - 1] = detail::argmax(score);
  for (std::size_t t = T - 1; t > 0; --t) path[t - 1] = back[t * n + path[t]];
  return path;
}

struct HmmSample {
  std::vector<Vec2> obs;
  std::vector<std::size_t> states;
};

inline HmmSample sample(const GaussianHmm& h, std::size_t length, std::uint64_t seed) {
  require(length >= 1, ErrorCode::invalid_input, "sample length must be >= 1");
  h.validate();
  const std::size_t n = h.n_states();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](std::span<const double> probs) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    // Rounding left u above the cumulative sum: take the last positive entry.
    std::size_t last = probs.size() - 1;
    while (last > 0 && probs[last] == 0.0) --last;
    return last;
  };

  HmmSample out;
  out.obs.reserve(length);
  out.states.reserve(length);
  std::size_t state = draw(h.initial);
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) state = draw(std::span<const double>(h.trans).subspan(state * n, n));
    const Sym2& c = h.covs[state];
    const double l11 = std::sqrt(c.xx);
    const double l21 = c.xy / l11;
    const double l22 = std::sqrt(std::max(c.yy - l21 * l21, 0.0));
    const double z1 = gauss(rng), z2 = gauss(rng);
    out.obs.push_back({h.means[state][0] + l11 * z1, h.means[state][1] + l21 * z1 + l22 * z2});
    out.states.push_back(state);
  }
  return out;
}

struct StateSummary {
  double mean_pl_db = 0.0;
  double mean_delta_db = 0.0;
};

inline std::vector<StateSummary> state_summary(const GaussianHmm& h) {
  std::vector<StateSummary> out;
  out.reserve(h.n_states());
  for (const Vec2& m : h.means) out.push_back({m[0], m[1]});
  return out;
}

/// Relabels states so that mean path loss ascends (stable for ties).
inline GaussianHmm sort_states_by_path_loss(const GaussianHmm& h) {
  const std::size_t n = h.n_states();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return h.means[a][0] < h.means[b][0]; });
  GaussianHmm out;
  out.initial.resize(n);
  out.trans.resize(n * n);
  out.means.resize(n);
  out.covs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.initial[i] = h.initial[order[i]];
    out.means[i] = h.means[order[i]];
    out.covs[i] = h.covs[order[i]];
    for (std::size_t j = 0; j < n; ++j) out.trans[i * n + j] = h.trans[order[i] * n + order[j]];
  }
  return out;
}

// --- training --------------------------------------------------------------

struct FitOptions {
  std::size_t n_states = 15;
  std::uint64_t seed = 0;
  std::size_t max_iters = 500;
  double tol = 1e-6;          // log-likelihood improvement threshold
  double cov_floor = 1e-6;    // dB^2, smallest admissible eigenvalue
  double self_loop = 0.9;     // initial diagonal transition mass
  std::size_t kmeans_iters = 25;
};

struct FitResult {
  GaussianHmm model;
  std::vector<double> log_likelihoods;  // one per E-step, in order
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

// k-means++ seeding followed by Lloyd refinement on standardized
// coordinates. Returns the cluster label of each observation.
inline std::vector<std::size_t> kmeans_labels(std::span<const Vec2> obs, std::size_t k,
                                              std::uint64_t seed, std::size_t iters) {
  const std::size_t T = obs.size();
  Vec2 mean{0, 0}, scale{0, 0};
  for (const Vec2& x : obs) {
    mean[0] += x[0];
    mean[1] += x[1];
  }
  mean[0] /= static_cast<double>(T);
  mean[1] /= static_cast<double>(T);
  for (const Vec2& x : obs) {
    scale[0] += (x[0] - mean[0]) * (x[0] - mean[0]);
    scale[1] += (x[1] - mean[1]) * (x[1] - mean[1]);
  }
  for (double& s : scale) {
    s = std::sqrt(s / static_cast<double>(T));
    if (!(s > 0)) s = 1.0;
  }
  std::vector<Vec2> z(T);
  for (std::size_t t = 0; t < T; ++t)
    z[t] = {(obs[t][0] - mean[0]) / scale[0], (obs[t][1] - mean[1]) / scale[1]};
  auto dist2 = [](const Vec2& a, const Vec2& b) {
    return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
  };

  std::mt19937_64 rng(seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<Vec2> centers;
  centers.push_back(z[static_cast<std::size_t>(uniform() * static_cast<double>(T)) % T]);
  std::vector<double> d2(T);
  for (std::size_t t = 0; t < T; ++t) d2[t] = dist2(z[t], centers[0]);
  while (centers.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (!(total > 0))
      fail(ErrorCode::degenerate_fit, "observations support fewer than " + std::to_string(k) +
                                          " distinct clusters");
    const double target = uniform() * total;
    double acc = 0.0;
    std::size_t pick = T - 1;
    for (std::size_t t = 0; t < T; ++t) {
      acc += d2[t];
      if (acc > target && d2[t] > 0) {
        pick = t;
        break;
      }
    }
    while (d2[pick] == 0.0 && pick > 0) --pick;
    centers.push_back(z[pick]);
    for (std::size_t t = 0; t < T; ++t) d2[t] = std::min(d2[t], dist2(z[t], centers.back()));
  }

  std::vector<std::size_t> label(T, 0);
  for (std::size_t it = 0; it <= iters; ++it) {
    bool changed = false;
    for (std::size_t t = 0; t < T; ++t) {
      std::size_t best = 0;
      double bd = dist2(z[t], centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = dist2(z[t], centers[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (label[t] != best || it == 0) changed |= label[t] != best;
      label[t] = best;
    }
    if (it > 0 && !changed) break;
    std::vector<Vec2> sum(k, Vec2{0, 0});
    std::vector<std::size_t> count(k, 0);
    for (std::size_t t = 0; t < T; ++t) {
      sum[label[t]][0] += z[t][0];
      sum[label[t]][1] += z[t][1];
      ++count[label[t]];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (count[c] > 0) centers[c] = {sum[c][0] / static_cast<double>(count[c]), sum[c][1] / static_cast<double>(count[c])};
  }
  return label;
}

struct WeightedMoments {
  double weight = 0.0;
  Vec2 mean{0, 0};
  Sym2 cov{0, 0, 0};
};

// Two-pass weighted mean and (biased) covariance of obs under weights w[t*stride+offset].
inline WeightedMoments weighted_moments(std::span<const Vec2> obs, std::span<const double> w,
                                        std::size_t stride, std::size_t offset) {
  WeightedMoments m;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const double g = w[t * stride + offset];
    m.weight += g;
    m.mean[0] += g * obs[t][0];
    m.mean[1] += g * obs[t][1];
  }
  if (!(m.weight > 0)) return m;
  m.mean[0] /= m.weight;
  m.mean[1] /= m.weight;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const double g = w[t * stride + offset];
    const double dx = obs[t][0] - m.mean[0], dy = obs[t][1] - m.mean[1];
    m.cov.xx += g * dx * dx;
    m.cov.xy += g * dx * dy;
    m.cov.yy += g * dy * dy;
  }
  m.cov.xx /= m.weight;
  m.cov.xy /= m.weight;
  m.cov.yy /= m.weight;
  return m;
}

}  // namespace detail

/// Baum-Welch with scaled forward-backward recursions. States of the
/// returned model are ordered by ascending mean path loss.
inline FitResult fit_em(std::span<const Vec2> obs, const FitOptions& opt) {
  const std::size_t n = opt.n_states, T = obs.size();
  require(n >= 1, ErrorCode::invalid_input, "n_states must be >= 1");
  require(opt.tol > 0, ErrorCode::invalid_input, "tolerance must be positive");
  require(opt.cov_floor > 0, ErrorCode::invalid_input, "covariance floor must be positive");
  require(T >= 10 * n, ErrorCode::invalid_input,
          "need at least " + std::to_string(10 * n) + " observations for " + std::to_string(n) +
              " states");
  for (const Vec2& x : obs)
    require(std::isfinite(x[0]) && std::isfinite(x[1]), ErrorCode::invalid_input,
            "observations must be finite");

  GaussianHmm h;
  h.initial.assign(n, 1.0 / static_cast<double>(n));
  h.trans.assign(n * n, n == 1 ? 1.0 : (1.0 - opt.self_loop) / static_cast<double>(n - 1));
  for (std::size_t i = 0; i < n; ++i) h.trans[i * n + i] = n == 1 ? 1.0 : opt.self_loop;
  {
    const auto labels = n == 1 ? std::vector<std::size_t>(T, 0)
                               : detail::kmeans_labels(obs, n, opt.seed, opt.kmeans_iters);
    std::vector<double> onehot(T * n, 0.0);
    for (std::size_t t = 0; t < T; ++t) onehot[t * n + labels[t]] = 1.0;
    const auto pooled = detail::weighted_moments(obs, std::vector<double>(T, 1.0), 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto m = detail::weighted_moments(obs, onehot, n, i);
      h.means.push_back(m.weight > 0 ? m.mean : pooled.mean);
      Sym2 c = m.weight > 1 ? m.cov : pooled.cov;
      c = floor_eigenvalues(c, opt.cov_floor);
      h.covs.push_back(c);
    }
  }

  FitResult result;
  std::vector<double> alpha(T * n), beta(T * n), gamma(T * n), b(T * n), scale(T);
  std::vector<double> xi(n * n);
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < opt.max_iters; ++iter) {
    // E-step.
    double ll = 0.0;
    for (std::size_t t = 0; t < T; ++t)
      ll += detail::scaled_emissions(h, obs[t], std::span<double>(b).subspan(t * n, n));
    for (std::size_t t = 0; t < T; ++t) {
      double norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double pred = 0.0;
        if (t == 0) {
          pred = h.initial[j];
        } else {
          const double* prev = &alpha[(t - 1) * n];
          for (std::size_t i = 0; i < n; ++i) pred += prev[i] * h.trans[i * n + j];
        }
        alpha[t * n + j] = pred * b[t * n + j];
        norm += alpha[t * n + j];
      }
      if (!(norm > 0))
        fail(ErrorCode::degenerate_fit, "forward recursion underflow at step " + std::to_string(t));
      scale[t] = norm;
      for (std::size_t j = 0; j < n; ++j) alpha[t * n + j] /= norm;
      ll += std::log(norm);
    }
    result.log_likelihoods.push_back(ll);
    result.iterations = iter + 1;
    if (iter > 0 && ll - prev_ll < opt.tol) {
      result.converged = true;
      break;
    }
    prev_ll = ll;

    for (std::size_t j = 0; j < n; ++j) beta[(T - 1) * n + j] = 1.0;
    for (std::size_t t = T - 1; t > 0; --t) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          acc += h.trans[i * n + j] * b[t * n + j] * beta[t * n + j];
        beta[(t - 1) * n + i] = acc / scale[t];
      }
    }
    std::fill(xi.begin(), xi.end(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      double norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        gamma[t * n + i] = alpha[t * n + i] * beta[t * n + i];
        norm += gamma[t * n + i];
      }
      for (std::size_t i = 0; i < n; ++i) gamma[t * n + i] /= norm;
      if (t + 1 < T) {
        for (std::size_t i = 0; i < n; ++i) {
          const double a = alpha[t * n + i] / scale[t + 1];
          for (std::size_t j = 0; j < n; ++j)
            xi[i * n + j] += a * h.trans[i * n + j] * b[(t + 1) * n + j] * beta[(t + 1) * n + j];
        }
      }
    }

    // M-step.
    for (std::size_t i = 0; i < n; ++i) h.initial[i] = gamma[i];
    const double init_sum = std::accumulate(h.initial.begin(), h.initial.end(), 0.0);
    for (double& p : h.initial) p /= init_sum;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += xi[i * n + j];
      if (row > 0)
        for (std::size_t j = 0; j < n; ++j) h.trans[i * n + j] = xi[i * n + j] / row;
      const auto m = detail::weighted_moments(obs, gamma, n, i);
      if (m.weight > 1e-10) {
        h.means[i] = m.mean;
        h.covs[i] = floor_eigenvalues(m.cov, opt.cov_floor);
      }
    }
  }

  h.validate();
  result.model = sort_states_by_path_loss(h);
  return result;
}

// --- serialization ---------------------------------------------------------

inline constexpr const char* hmm_format = "wusn.gaussian_hmm";
inline constexpr int hmm_format_version = 1;

inline nlohmann::json to_json(const GaussianHmm& h) {
  nlohmann::json covs = nlohmann::json::array();
  nlohmann::json means = nlohmann::json::array();
  for (std::size_t i = 0; i < h.n_states(); ++i) {
    means.push_back({h.means[i][0], h.means[i][1]});
    covs.push_back({h.covs[i].xx, h.covs[i].xy, h.covs[i].xy, h.covs[i].yy});
  }
  return {{"format", hmm_format}, {"version", hmm_format_version}, {"n_states", h.n_states()},
          {"initial", h.initial},  {"trans", h.trans},                {"means", means},
          {"covs", covs}};
}

inline GaussianHmm hmm_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format").get<std::string>() == hmm_format, ErrorCode::schema,
            "not a gaussian hmm document");
    require(j.at("version").get<int>() == hmm_format_version, ErrorCode::schema,
            "unsupported hmm document version");
    GaussianHmm h;
    const auto n = j.at("n_states").get<std::size_t>();
    h.initial = j.at("initial").get<std::vector<double>>();
    h.trans = j.at("trans").get<std::vector<double>>();
    for (const auto& m : j.at("means")) h.means.push_back({m.at(0).get<double>(), m.at(1).get<double>()});
    for (const auto& c : j.at("covs")) {
      require(c.size() == 4, ErrorCode::schema, "covariance must have 4 entries");
      require(c.at(1).get<double>() == c.at(2).get<double>(), ErrorCode::schema,
              "covariance not symmetric");
      h.covs.push_back({c.at(0).get<double>(), c.at(1).get<double>(), c.at(3).get<double>()});
    }
    require(h.n_states() == n, ErrorCode::schema, "n_states does not match arrays");
    h.validate();
    return h;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::schema, std::string("malformed hmm document: ") + e.what());
  }
}

}  // namespace wusn
