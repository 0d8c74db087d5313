#pragma once

// Glue between the stages: soil series -> path loss -> channel model -> policy.

#include <cstdint>
#include <vector>

#include "wusn/config.hpp"
#include "wusn/data_pipeline.hpp"
#include "wusn/hmm.hpp"
#include "wusn/mdp.hpp"

namespace wusn {

inline std::vector<Vec2> observations(const PathLossTrace& trace) {
  std::vector<Vec2> obs;
  obs.reserve(trace.size());
  for (std::size_t t = 0; t < trace.size(); ++t) obs.push_back({trace.pl_db[t], trace.delta_db[t]});
  return obs;
}

inline FitOptions fit_options(const RunConfig& c) {
  FitOptions o;
  o.n_states = c.hmm.n_states;
  o.seed = derive_seed(c.seed, seed_hmm);
  o.max_iters = c.hmm.max_iters;
  o.tol = c.hmm.tol;
  o.cov_floor = c.hmm.cov_floor;
  return o;
}

inline FitResult train_channel_model(const PathLossTrace& trace, const RunConfig& c) {
  auto obs = observations(trace);
  if (c.hmm.window > 0 && c.hmm.window < obs.size()) obs.resize(c.hmm.window);
  return fit_em(obs, fit_options(c));
}

inline PathLossTrace synth_trace(const RunConfig& c) {
  return to_pathloss_trace(clean(synth_generate(c.synth, derive_seed(c.seed, seed_synth))), c.geometry);
}

inline SweepSettings sweep_settings(const RunConfig& c, unsigned jobs = 1) {
  SweepSettings s;
  s.mdp = c.mdp;
  s.vi_tol = c.solver.tol;
  s.vi_max_iters = c.solver.max_iters;
  s.genie_state = c.genie_state;
  s.jobs = jobs;
  return s;
}

}  // namespace wusn
