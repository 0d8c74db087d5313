// wusn: command-line driver for the soil channel / transmission policy pipeline.
//
//   wusn synth --out soil.csv
//   wusn ingest soil.csv --out trace.csv
//   wusn train soil.csv --out model.json
//   wusn solve model.json --out policy.json
//   wusn simulate policy.json trace.csv --out metrics.csv
//   wusn sweep power --out power.csv

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wusn/wusn.hpp"

#ifndef WUSN_VERSION
#define WUSN_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wusn;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned jobs = 1;
  bool print_config = false;
};

RunConfig effective_config(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  return c;
}

std::string companion(const std::string& path, const std::string& extension) {
  return fs::path(path).replace_extension(extension).string();
}

std::ofstream open_out(const std::string& path) {
  require(!path.empty(), ErrorCode::io, "no output path given (use --out)");
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write '" + path + "'");
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  require(!out.fail(), ErrorCode::io, "failed writing '" + path + "'");
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open '" + path + "'");
  return in;
}

json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::schema, path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  close_out(out, path);
}

json report_header(const std::string& command, const RunConfig& c) {
  return {{"command", command}, {"version", WUSN_VERSION}, {"seed", c.seed}, {"config", to_json(c)}};
}

PathLossTrace ingest_trace(const std::string& path, const RunConfig& c) {
  auto in = open_in(path);
  return to_pathloss_trace(clean(parse_csv(in, c.schema)), c.geometry);
}

PathLossTrace load_trace(const std::string& path, const LinkGeometry& g) {
  auto in = open_in(path);
  return parse_trace_csv(in, g);
}

// --- commands --------------------------------------------------------------

int cmd_synth(const Globals& g) {
  const RunConfig c = effective_config(g);
  const SoilTimeSeries series = synth_generate(c.synth, derive_seed(c.seed, seed_synth));
  auto out = open_out(g.out);
  write_timestamped_csv(out, series);
  close_out(out, g.out);
  std::cerr << "wrote " << series.size() << " samples to " << g.out << '\n';
  return 0;
}

int cmd_ingest(const Globals& g, const std::string& input, const std::string& series_out) {
  const RunConfig c = effective_config(g);
  auto in = open_in(input);
  const CleanedSeries cleaned = clean(parse_csv(in, c.schema));
  const PathLossTrace trace = to_pathloss_trace(cleaned, c.geometry);
  auto out = open_out(g.out);
  write_trace_csv(out, trace);
  close_out(out, g.out);
  if (!series_out.empty()) {
    auto s = open_out(series_out);
    write_series_csv(s, cleaned);
    close_out(s, series_out);
  }
  std::cerr << "wrote " << trace.size() << " path-loss samples to " << g.out << '\n';
  return 0;
}

int cmd_train(const Globals& g, const std::string& input, bool is_trace) {
  const RunConfig c = effective_config(g);
  const PathLossTrace trace = is_trace ? load_trace(input, c.geometry) : ingest_trace(input, c);
  const FitResult fit = train_channel_model(trace, c);
  write_json(g.out, to_json(fit.model));

  const std::string summary_path = companion(g.out, ".states.csv");
  auto s = open_out(summary_path);
  s << "state,mean_pl_db,mean_delta_db,self_transition\n";
  const auto summary = state_summary(fit.model);
  for (std::size_t i = 0; i < summary.size(); ++i)
    s << i << ',' << detail::format_double(summary[i].mean_pl_db) << ','
      << detail::format_double(summary[i].mean_delta_db) << ','
      << detail::format_double(fit.model.transition(i, i)) << '\n';
  close_out(s, summary_path);

  json report = report_header("train", c);
  report["iterations"] = fit.iterations;
  report["converged"] = fit.converged;
  report["log_likelihoods"] = fit.log_likelihoods;
  write_json(companion(g.out, ".fit.json"), report);
  std::cerr << "fitted " << fit.model.n_states() << " states in " << fit.iterations << " iterations"
            << (fit.converged ? "" : " (iteration limit reached)") << '\n';
  return 0;
}

int cmd_solve(const Globals& g, const std::string& model_path, std::optional<double> power) {
  const RunConfig c = effective_config(g);
  const GaussianHmm channel = hmm_from_json(read_json(model_path));
  RadioConfig radio = c.radio;
  if (power) radio.tx_power_w = *power;
  const MdpModel model = build_model(channel, radio, c.mdp);
  const Solution sol = value_iteration(model, c.solver.tol, c.solver.max_iters);
  write_json(g.out, to_json(sol, model, channel));
  std::cerr << "converged in " << sol.sweeps << " sweeps, residual " << sol.residuals.back() << '\n';
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& policy_path, const std::string& trace_path) {
  const RunConfig c = effective_config(g);
  const PolicyDocument doc = policy_from_json(read_json(policy_path));
  const PathLossTrace trace = load_trace(trace_path, c.geometry);
  const RadioConfig& radio = doc.model.radio;
  const std::size_t cap = doc.model.params.queue_capacity;
  const std::uint64_t base = derive_seed(c.seed, seed_sim);

  const std::vector<PolicyKind> kinds{RlAgent{doc.solution.policy, doc.channel, c.genie_state},
                                      SenseThenTransmit{2}, SenseThenTransmit{8}};
  std::vector<SimMetrics> results;
  for (std::size_t i = 0; i < kinds.size(); ++i) results.push_back(run(trace, kinds[i], radio, cap, base ^ i));

  auto out = open_out(g.out);
  write_metrics_csv_header(out);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const bool rl = i == 0;
    write_metrics_csv_row(out, radio.tx_power_w, results[i].kind, rl ? cap : 0, rl ? doc.model.params.t_max : 0,
                          results[i]);
  }
  close_out(out, g.out);

  json report = report_header("simulate", c);
  report["tx_power_w"] = radio.tx_power_w;
  report["periods"] = trace.size();
  report["runs"] = json::array();
  for (const auto& m : results) report["runs"].push_back(to_json(m));
  write_json(companion(g.out, ".json"), report);
  for (const auto& m : results) std::cerr << m.kind << ": dropped " << m.dropped << '\n';
  return 0;
}

struct SweepInputs {
  PathLossTrace trace;
  GaussianHmm channel;
};

SweepInputs sweep_inputs(const RunConfig& c, const std::string& trace_path, const std::string& model_path) {
  SweepInputs in;
  in.trace = trace_path.empty() ? synth_trace(c) : load_trace(trace_path, c.geometry);
  if (model_path.empty()) {
    std::cerr << "training channel model on " << in.trace.size() << " samples\n";
    in.channel = train_channel_model(in.trace, c).model;
  } else {
    in.channel = hmm_from_json(read_json(model_path));
  }
  return in;
}

bool non_increasing(const std::vector<std::uint64_t>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

int cmd_sweep(const Globals& g, const std::string& kind, const std::string& trace_path,
              const std::string& model_path) {
  const RunConfig c = effective_config(g);
  const SweepInputs in = sweep_inputs(c, trace_path, model_path);
  const SweepSettings settings = sweep_settings(c, g.jobs);
  const std::uint64_t base = derive_seed(c.seed, seed_sim);
  json report = report_header("sweep " + kind, c);
  std::vector<SweepRow> rows;

  if (kind == "power") {
    rows = run_power_sweep(in.trace, in.channel, c.sweep.kinds, c.sweep.powers_w, c.radio, settings, base);
    json flags;
    for (AgentKind k : c.sweep.kinds) {
      std::vector<std::uint64_t> dropped;
      for (const auto& r : rows)
        if (r.kind == k) dropped.push_back(r.metrics.dropped);
      flags["dropped_non_increasing"][to_string(k)] = non_increasing(dropped);
    }
    const double top = c.sweep.powers_w.back();
    const SweepRow* rl = nullptr;
    const SweepRow* psk8 = nullptr;
    for (const auto& r : rows)
      if (r.power_w == top) {
        if (r.kind == AgentKind::rl) rl = &r;
        if (r.kind == AgentKind::psk8) psk8 = &r;
      }
    if (rl && psk8 && rl->metrics.successful > 0 && psk8->metrics.successful > 0) {
      const double gap = std::abs(energy_per_success(rl->metrics) / energy_per_success(psk8->metrics) - 1.0);
      flags["ratio_gap_at_max_power"] = gap;
      flags["ratio_converged"] = gap <= 0.05;
    }
    report["flags"] = flags;
  } else {
    RadioConfig radio = c.radio;
    radio.tx_power_w = c.sweep.queue_power_w;
    rows = run_queue_sweep(in.trace, in.channel, c.sweep.queue_sizes, radio, settings, base);
    SweepRow bpsk;
    bpsk.power_w = radio.tx_power_w;
    bpsk.kind = AgentKind::bpsk;
    bpsk.seed = base ^ rows.size();
    bpsk.metrics = run(in.trace, SenseThenTransmit{2}, radio, 0, bpsk.seed);
    std::vector<std::uint64_t> dropped;
    for (const auto& r : rows) dropped.push_back(r.metrics.dropped);
    report["flags"] = {{"dropped_non_increasing", non_increasing(dropped)},
                       {"largest_below_bpsk", dropped.back() < bpsk.metrics.dropped}};
    rows.push_back(bpsk);
  }

  auto out = open_out(g.out);
  write_sweep_csv(out, rows);
  close_out(out, g.out);
  report["rows"] = json::array();
  for (const auto& r : rows) {
    json j = to_json(r.metrics);
    j["power_w"] = r.power_w;
    j["n_q"] = r.n_q;
    j["t_max"] = r.t_max;
    j["seed"] = r.seed;
    j["vi_sweeps"] = r.sweeps;
    report["rows"].push_back(j);
  }
  write_json(companion(g.out, ".json"), report);
  std::cerr << "wrote " << rows.size() << " rows to " << g.out << '\n';
  return 0;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::convergence_failure: return 3;
    case ErrorCode::io: return 4;
    case ErrorCode::invalid_config:
    case ErrorCode::configuration: return 5;
    default: return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soil channel modelling and transmission policy pipeline"};
  app.set_version_flag("--version", std::string(WUSN_VERSION));
  Globals g;
  app.option_defaults()->always_capture_default();
  app.add_option("--config", g.config_path, "Configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Top-level seed");
  app.add_option("--out", g.out, "Output path");
  app.add_option("--jobs", g.jobs, "Concurrent runs in sweeps")->check(CLI::Range(1u, 1024u));
  app.add_flag("--print-config", g.print_config, "Print the effective configuration and exit");
  app.fallthrough();

  auto* synth = app.add_subcommand("synth", "Write a synthetic soil time series CSV");

  std::string ingest_in, series_out;
  auto* ingest = app.add_subcommand("ingest", "Clean a soil CSV and write its path-loss trace");
  ingest->add_option("input", ingest_in, "Soil CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--series-out", series_out, "Also write the cleaned series here");

  std::string train_in;
  bool train_is_trace = false;
  auto* train = app.add_subcommand("train", "Fit the channel HMM");
  train->add_option("input", train_in, "Soil CSV, or path-loss trace with --trace")->required()->check(CLI::ExistingFile);
  train->add_flag("--trace", train_is_trace, "Input is a path-loss trace CSV");

  std::string model_in;
  std::optional<double> power;
  auto* solve = app.add_subcommand("solve", "Solve the transmission policy for a channel model");
  solve->add_option("model", model_in, "Channel model JSON")->required()->check(CLI::ExistingFile);
  solve->add_option("--power", power, "Transmit power in W (overrides the config)");

  std::string policy_in, trace_in;
  auto* simulate = app.add_subcommand("simulate", "Run the policy and baselines over a trace");
  simulate->add_option("policy", policy_in, "Policy JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("trace", trace_in, "Path-loss trace CSV")->required()->check(CLI::ExistingFile);

  std::string sweep_kind, sweep_trace, sweep_model;
  auto* sweep = app.add_subcommand("sweep", "Power or queue-capacity sweep");
  sweep->add_option("kind", sweep_kind, "power or queue")->required()->check(CLI::IsMember({"power", "queue"}));
  sweep->add_option("--trace", sweep_trace, "Path-loss trace CSV (default: synthesize)")->check(CLI::ExistingFile);
  sweep->add_option("--model", sweep_model, "Channel model JSON (default: train on the trace)")
      ->check(CLI::ExistingFile);

  for (auto* sub : {synth, ingest, train, solve, simulate, sweep}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (g.print_config) {
      print_config(std::cout, effective_config(g));
      return 0;
    }
    if (*synth) return cmd_synth(g);
    if (*ingest) return cmd_ingest(g, ingest_in, series_out);
    if (*train) return cmd_train(g, train_in, train_is_trace);
    if (*solve) return cmd_solve(g, model_in, power);
    if (*simulate) return cmd_simulate(g, policy_in, trace_in);
    if (*sweep) return cmd_sweep(g, sweep_kind, sweep_trace, sweep_model);
    std::cerr << app.help();
    return 1;
  } catch (const Error& e) {
    std::cerr << "wusn: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "wusn: " << e.what() << '\n';
    return 2;
  }
}
