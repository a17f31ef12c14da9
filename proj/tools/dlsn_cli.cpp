// dlsn command-line tool: simulate, ingest, fit, predict, summarize, experiment, grid.

#include <chrono>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "dlsn/dlsn.hpp"

namespace {

using namespace dlsn;

// Output paths a command has started writing; removed again if the command fails.
class OutputGuard {
 public:
  fs::path claim(const fs::path& p) {
    std::error_code ec;
    fs::remove_all(p, ec);
    paths_.push_back(p);
    return p;
  }
  void rollback() {
    for (const auto& p : paths_) {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  }

 private:
  std::vector<fs::path> paths_;
};

void echo_config(const RunConfig& c) {
  std::cout << "# resolved config\n" << config_text(c) << std::flush;
}

void echo_trace_config(const Trace& t, const std::string& holdout) {
  RunConfig c;
  c.hyper = t.config;
  c.seeds = {t.config.seed};
  c.holdout = parse_holdout_text(holdout);
  std::cout << "# trace config\n";
  const auto text = config_text(c);
  // generator keys are not part of a fit; show sampler keys only
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("dgp.", 0) != 0 && line.rfind("compare_variant", 0) != 0 && line.rfind("name", 0) != 0)
      std::cout << line << "\n";
  std::cout << std::flush;
}

ProgressFn progress_to_stderr(long iterations) {
  const long step = std::max(1L, iterations / 10);
  return [=](long it, const ModelState&) {
    if (it % step == 0 || it == iterations) std::fprintf(stderr, "  iteration %ld/%ld\n", it, iterations);
  };
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// The trace records the holdout rule; the same cells are held out again from the full dataset.
struct FitInputs {
  Trace trace;
  std::string holdout;
  Dataset data;
  HoldoutResult split;
};

FitInputs load_fit(const std::string& trace_dir, const std::string& data_dir) {
  FitInputs in;
  json attrs;
  in.trace = read_trace(trace_dir, &attrs);
  in.holdout = attrs.value("holdout", "none");
  in.data = read_dataset(data_dir);
  if (in.data.data.labels() != in.trace.labels || !(in.data.data.grid() == in.trace.grid))
    throw DataError("trace " + trace_dir + " was not fitted to dataset " + data_dir);
  const auto rule = parse_holdout_text(in.holdout);
  in.split = rule ? holdout(in.data.data, *rule) : HoldoutResult{in.data.data, {}};
  echo_trace_config(in.trace, in.holdout);
  return in;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config, const std::string& out, OutputGuard& guard) {
  const auto cfg = load_config(config);
  echo_config(cfg);
  std::cout << "seed = " << cfg.dgp.seed << " (generator)\n";
  const auto sim = simulate(cfg.dgp);
  const auto& dir = guard.claim(out);
  write_dataset(dir, sim.data, sim.cov);
  write_truth(dir / "truth", sim.truth);
  std::cout << "wrote " << sim.data.nodes() << " nodes x " << sim.data.times() << " times to " << out << "\n";
  return kExitOk;
}

struct IngestArgs {
  std::string events, covariates, nodes, nodes_file, start, end, bin = "quarter", out;
  std::size_t lag = 1;
};

int cmd_ingest(const IngestArgs& a, OutputGuard& guard) {
  WindowSpec w;
  w.start = parse_date(a.start);
  w.end = parse_date(a.end);
  w.bin = parse_bin_width(a.bin);
  if (!a.nodes.empty()) {
    w.nodes = detail::split_list(a.nodes);
  } else {
    std::ifstream in(a.nodes_file);
    if (!in) throw ConfigError("cannot open node list " + a.nodes_file);
    for (std::string line; std::getline(in, line);)
      if (!trim(line).empty()) w.nodes.push_back(trim(line));
  }
  w.validate();
  std::cout << "# resolved window\nstart = " << a.start << "\nend = " << a.end << "\nbin = " << a.bin
            << "\nnodes = " << w.nodes.size() << "\nlag = " << (a.covariates.empty() ? std::string("none") : std::to_string(a.lag))
            << "\nseed = none (ingest is deterministic)\n";
  auto net = ingest_events(a.events, w);
  const auto& r = net.report;
  std::cout << "events: " << r.rows << " rows, " << r.kept << " kept, " << r.self_loops << " self-loops, "
            << r.outside_whitelist << " outside whitelist, " << r.outside_window << " outside window\n";
  CovariateSet cov;
  auto data = net.data;
  auto bins = net.bin_labels;
  if (!a.covariates.empty()) {
    cov = ingest_covariates(a.covariates, w, a.lag);
    data = drop_front_bins(data, a.lag);
    bins.erase(bins.begin(), bins.begin() + static_cast<std::ptrdiff_t>(a.lag));
  }
  const auto& dir = guard.claim(a.out);
  write_dataset(dir, data, cov, bins);
  std::cout << "wrote " << data.nodes() << " nodes x " << data.times() << " bins (" << bins.front() << " .. "
            << bins.back() << ") to " << a.out << "\n";
  return kExitOk;
}

int cmd_fit(const std::string& config, const std::string& data_dir, const std::string& out, OutputGuard& guard) {
  const auto cfg = load_config(config);
  echo_config(cfg);
  const auto ds = read_dataset(data_dir);
  const auto split = cfg.holdout ? holdout(ds.data, *cfg.holdout) : HoldoutResult{ds.data, {}};
  std::cout << "holdout = " << holdout_text(cfg.holdout) << " (" << split.held.size() << " cells)\n";
  const auto& root = guard.claim(out);
  for (std::size_t c = 0; c < cfg.seeds.size(); ++c) {
    const auto hyper = cfg.chain(c);
    std::cout << "seed = " << hyper.seed << "\n" << std::flush;
    const auto t0 = std::chrono::steady_clock::now();
    const auto trace = run_chain(split.masked, ds.cov, hyper, progress_to_stderr(hyper.iterations));
    const auto dir = cfg.seeds.size() == 1 ? root : root / ("chain_" + std::to_string(hyper.seed));
    write_trace(dir, trace, {{"holdout", holdout_text(cfg.holdout)}});
    std::fprintf(stderr, "  chain seed %llu: %.1f s\n", static_cast<unsigned long long>(hyper.seed), seconds_since(t0));
    std::cout << "wrote " << trace.draws.size() << " draws to " << dir.string() << "\n";
  }
  return kExitOk;
}

int cmd_predict(const std::string& trace_dir, const std::string& data_dir, const std::string& out, OutputGuard& guard) {
  const auto in = load_fit(trace_dir, data_dir);
  std::cout << "seed = " << in.trace.config.seed << "\n";
  if (in.split.held.empty()) throw DomainError("trace " + trace_dir + " has no held-out cells to predict");
  const auto rows = predict_held(in.trace, in.split.held);
  write_predictions(guard.claim(out), rows, in.data.data);
  std::cout << "wrote " << rows.size() << " predictions to " << out << "\n";
  return kExitOk;
}

int cmd_summarize(const std::string& trace_dir, const std::string& data_dir, const std::string& out,
                  std::size_t ess_cells, OutputGuard& guard) {
  const auto in = load_fit(trace_dir, data_dir);
  std::cout << "seed = " << in.trace.config.seed << "\n";
  const auto s = summarize_trace(in.trace, in.split.masked, in.data.cov, in.split.held, ess_cells);
  write_summary(guard.claim(out), s, in.split.masked, in.trace.draws.size());
  std::cout << "fit_auc = " << csv_num(s.scores.fit_auc) << "\npred_auc = "
            << (s.scores.pred_auc ? csv_num(*s.scores.pred_auc) : "NA") << "\nwrote report to " << out << "\n";
  return kExitOk;
}

void print_checks(const std::vector<Check>& checks) {
  for (const auto& c : checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.expect.metric << " = " << csv_num(c.measured) << " (expected "
              << to_string(c.expect.op) << " " << csv_num(c.expect.bound) << ")\n";
}

int cmd_experiment(const std::string& config, const std::string& out, OutputGuard& guard) {
  const auto cfg = load_config(config);
  echo_config(cfg);
  std::cout << "seed = " << cfg.seeds.front() << " (fit), " << cfg.dgp.seed << " (generator)\n" << std::flush;
  ExperimentOptions opt;
  opt.progress = progress_to_stderr(cfg.hyper.iterations);
  const auto r = run_experiment(cfg, opt);
  std::fprintf(stderr, "  experiment %s: %.1f s\n", r.name.c_str(), r.seconds);
  write_experiment(guard.claim(out), r);
  for (const auto& m : r.metrics)
    if (m.name.rfind("tau_inv_gap", 0) != 0 && m.name.rfind("tau_inv_m", 0) != 0)
      std::cout << m.name << " = " << csv_num(m.value) << "\n";
  print_checks(r.checks);
  return kExitOk;
}

int cmd_grid(const std::string& config, const std::string& axis, const std::string& values, const std::string& out,
             OutputGuard& guard) {
  const auto cfg = load_config(config);
  const auto ax = parse_grid_axis(axis);
  echo_config(cfg);
  std::cout << "grid " << axis << " = " << values << "\nseed = " << cfg.seeds.front() << " (fit), " << cfg.dgp.seed
            << " (generator)\n" << std::flush;
  const auto g = sensitivity_grid(cfg, ax, detail::split_list(values), [&](const GridCell& c) {
    std::cout << axis << " = " << c.value << ": ";
    if (c.error.empty())
      std::cout << "fit_auc " << csv_num(*c.fit_auc) << ", pred_auc " << (c.pred_auc ? csv_num(*c.pred_auc) : "NA") << "\n";
    else
      std::cout << "failed: " << c.error << "\n";
    std::cout << std::flush;
  });
  write_grid(guard.claim(out), g);
  print_checks(g.checks);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic latent space network models: simulate, ingest, fit, predict, summarize"};
  app.require_subcommand(1);

  std::string config, out, data, trace, axis, values;
  std::size_t ess_cells = 1000;
  IngestArgs ia;

  auto* sim = app.add_subcommand("simulate", "draw a dataset and its ground truth from a config");
  sim->add_option("--config", config, "config file")->required();
  sim->add_option("--out", out, "output dataset directory")->required();

  auto* ing = app.add_subcommand("ingest", "bin an event log (and covariates) into a dataset");
  ing->add_option("--events", ia.events, "events CSV with source,target,date")->required();
  ing->add_option("--covariates", ia.covariates, "covariates CSV with node,bin,value");
  ing->add_option("--lag", ia.lag, "covariate lag in bins")->capture_default_str();
  auto* nodes = ing->add_option("--nodes", ia.nodes, "comma-separated node whitelist, in order");
  ing->add_option("--nodes-file", ia.nodes_file, "node whitelist, one label per line")->excludes(nodes);
  ing->add_option("--start", ia.start, "first date, YYYY-MM-DD")->required();
  ing->add_option("--end", ia.end, "last date, YYYY-MM-DD (inclusive)")->required();
  ing->add_option("--bin", ia.bin, "month, quarter or year")->capture_default_str();
  ing->add_option("--out", ia.out, "output dataset directory")->required();

  auto* fit = app.add_subcommand("fit", "run the Gibbs sampler on a dataset");
  fit->add_option("--config", config, "config file")->required();
  fit->add_option("--data", data, "dataset directory")->required();
  fit->add_option("--out", out, "trace directory (one sub-directory per seed when several are given)")->required();

  auto* pred = app.add_subcommand("predict", "posterior predictive table for the held-out cells");
  pred->add_option("--trace", trace, "trace directory")->required();
  pred->add_option("--data", data, "dataset directory the trace was fitted to")->required();
  pred->add_option("--out", out, "output CSV")->required();

  auto* sum = app.add_subcommand("summarize", "posterior summary report");
  sum->add_option("--trace", trace, "trace directory")->required();
  sum->add_option("--data", data, "dataset directory the trace was fitted to")->required();
  sum->add_option("--out", out, "report directory")->required();
  sum->add_option("--ess-cells", ess_cells, "probability cells monitored for ESS (0 = all)")->capture_default_str();

  auto* exp = app.add_subcommand("experiment", "simulate, fit and check expect.* metrics");
  exp->add_option("--config", config, "experiment config file")->required();
  exp->add_option("--out", out, "report directory")->required();

  auto* grid = app.add_subcommand("grid", "sensitivity grid along one axis");
  grid->add_option("--config", config, "base experiment config")->required();
  grid->add_option("--axis", axis, "h_star, rho, k or size")->required();
  grid->add_option("--values", values, "comma-separated values (size: <nodes>x<times>)")->required();
  grid->add_option("--out", out, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (ing->parsed() && ia.nodes.empty() && ia.nodes_file.empty()) {
    std::cerr << "error: ingest needs --nodes or --nodes-file (the whitelist is never inferred)\n";
    return kExitConfig;
  }

  OutputGuard guard;
  try {
    if (sim->parsed()) return cmd_simulate(config, out, guard);
    if (ing->parsed()) return cmd_ingest(ia, guard);
    if (fit->parsed()) return cmd_fit(config, data, out, guard);
    if (pred->parsed()) return cmd_predict(trace, data, out, guard);
    if (sum->parsed()) return cmd_summarize(trace, data, out, ess_cells, guard);
    if (exp->parsed()) return cmd_experiment(config, out, guard);
    if (grid->parsed()) return cmd_grid(config, axis, values, out, guard);
  } catch (const json::exception& e) {
    guard.rollback();
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    guard.rollback();
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    guard.rollback();
    const int code = exit_code_for_current();
    const char* kind = code == kExitConfig ? "config error" : code == kExitData ? "data error" : "numerical error";
    std::cerr << kind << ": " << e.what() << "\n";
    return code;
  }
  return kExitConfig;
}
