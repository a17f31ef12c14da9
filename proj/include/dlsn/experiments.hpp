#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "dlsn/config.hpp"
#include "dlsn/evaluate.hpp"
#include "dlsn/report.hpp"
#include "dlsn/simulate.hpp"

namespace dlsn {

/// An experiment is a run config: generator, sampler, holdout rule and expect.* checks.
using ExperimentSpec = RunConfig;

struct Metric {
  std::string name;
  double value = 0.0;
};

struct Check {
  Expectation expect;
  double measured = 0.0;
  bool pass = false;
};

struct ExperimentResult {
  std::string name;
  std::vector<Metric> metrics;
  std::vector<Check> checks;
  double seconds = 0.0;  // wall time, never written to reports
  std::optional<Trace> trace;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }

  std::optional<double> metric(const std::string& name) const {
    for (const auto& m : metrics)
      if (m.name == name) return m.value;
    return std::nullopt;
  }
};

/**
 * Names run_experiment can produce for a spec:
 *   fit_auc, fit_auc_per_draw, density, pred_auc (with a holdout),
 *   tau_inv_<h>, tau_inv_min_to_<k>, tau_inv_max_from_<k>,
 *   tau_inv_gap_<k>_<m> = min_to_k - max_from_m (dlsn fits),
 *   compare_fit_auc, fit_auc_gap, and the pred_ versions (with compare_variant).
 * grid_* names belong to sensitivity_grid.
 */
inline std::vector<std::string> metric_names(const ExperimentSpec& spec) {
  std::vector<std::string> out{"density", "fit_auc", "fit_auc_per_draw"};
  if (spec.holdout) out.push_back("pred_auc");
  if (has_network_effects(spec.hyper.variant)) {
    const std::size_t h = spec.hyper.h_star;
    for (std::size_t k = 1; k <= h; ++k) out.push_back("tau_inv_" + std::to_string(k));
    for (std::size_t k = 1; k <= h; ++k) out.push_back("tau_inv_min_to_" + std::to_string(k));
    for (std::size_t k = 1; k <= h; ++k) out.push_back("tau_inv_max_from_" + std::to_string(k));
    for (std::size_t k = 1; k <= h; ++k)
      for (std::size_t m = k + 1; m <= h; ++m) out.push_back("tau_inv_gap_" + std::to_string(k) + "_" + std::to_string(m));
  }
  if (spec.compare_variant) {
    out.insert(out.end(), {"compare_fit_auc", "fit_auc_gap"});
    if (spec.holdout) out.insert(out.end(), {"compare_pred_auc", "pred_auc_gap"});
  }
  return out;
}

inline bool is_grid_metric(const std::string& name) { return name.rfind("grid_", 0) == 0; }

inline void validate_expectations(const ExperimentSpec& spec) {
  const auto names = metric_names(spec);
  for (const auto& e : spec.expect) {
    if (is_grid_metric(e.metric)) continue;
    if (std::find(names.begin(), names.end(), e.metric) == names.end())
      throw ConfigError(spec.name + ": expect." + e.metric + " is not a metric this experiment produces");
  }
}

/// Posterior means of 1 / tau_h and the derived head/tail contrasts.
inline void add_tau_metrics(std::vector<Metric>& out, const Trace& trace) {
  const auto h = static_cast<std::size_t>(trace.draws.front().tau.size());
  std::vector<double> inv(h, 0.0);
  for (const auto& d : trace.draws)
    for (std::size_t k = 0; k < h; ++k) inv[k] += 1.0 / d.tau(static_cast<Eigen::Index>(k));
  for (auto& x : inv) x /= static_cast<double>(trace.draws.size());
  std::vector<double> min_to(h), max_from(h);
  for (std::size_t k = 0; k < h; ++k) {
    min_to[k] = *std::min_element(inv.begin(), inv.begin() + static_cast<std::ptrdiff_t>(k + 1));
    max_from[k] = *std::max_element(inv.begin() + static_cast<std::ptrdiff_t>(k), inv.end());
  }
  for (std::size_t k = 0; k < h; ++k) out.push_back({"tau_inv_" + std::to_string(k + 1), inv[k]});
  for (std::size_t k = 0; k < h; ++k) out.push_back({"tau_inv_min_to_" + std::to_string(k + 1), min_to[k]});
  for (std::size_t k = 0; k < h; ++k) out.push_back({"tau_inv_max_from_" + std::to_string(k + 1), max_from[k]});
  for (std::size_t k = 0; k < h; ++k)
    for (std::size_t m = k + 1; m < h; ++m)
      out.push_back({"tau_inv_gap_" + std::to_string(k + 1) + "_" + std::to_string(m + 1), min_to[k] - max_from[m]});
}

struct ExperimentOptions {
  bool keep_trace = false;
  ProgressFn progress;
};

/**
 * @brief simulate -> holdout -> fit (and optional comparison fit) -> metrics -> checks.
 *
 * Uses the first seed in the spec. Errors keep their type and gain the experiment name.
 */
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const ExperimentOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult out;
  out.name = spec.name;
  try {
    spec.validate();
    validate_expectations(spec);
    const auto sim = simulate(spec.dgp);
    HoldoutResult split{sim.data, {}};
    if (spec.holdout) split = holdout(sim.data, *spec.holdout);

    double ones = 0.0;
    for_each_dyad(sim.data.nodes(), sim.data.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
      ones += static_cast<double>(*sim.data.value(i, j, t));
    });
    out.metrics.push_back({"density", ones / static_cast<double>(sim.data.observed_count())});

    auto trace = run_chain(split.masked, sim.cov, spec.chain(0), opt.progress);
    const auto scores = score_fit(trace, split.masked, split.held);
    out.metrics.push_back({"fit_auc", scores.fit_auc});
    out.metrics.push_back({"fit_auc_per_draw", scores.fit_auc_per_draw});
    if (scores.pred_auc) out.metrics.push_back({"pred_auc", *scores.pred_auc});
    if (has_network_effects(spec.hyper.variant)) add_tau_metrics(out.metrics, trace);

    if (spec.compare_variant) {
      auto cfg = spec.chain(0);
      cfg.variant = *spec.compare_variant;
      const auto other = score_fit(run_chain(split.masked, sim.cov, cfg, opt.progress), split.masked, split.held);
      out.metrics.push_back({"compare_fit_auc", other.fit_auc});
      out.metrics.push_back({"fit_auc_gap", scores.fit_auc - other.fit_auc});
      if (other.pred_auc && scores.pred_auc) {
        out.metrics.push_back({"compare_pred_auc", *other.pred_auc});
        out.metrics.push_back({"pred_auc_gap", *scores.pred_auc - *other.pred_auc});
      }
    }
    for (const auto& e : spec.expect) {
      if (is_grid_metric(e.metric)) continue;
      const double m = *out.metric(e.metric);
      out.checks.push_back({e, m, e.holds(m)});
    }
    if (opt.keep_trace) out.trace = std::move(trace);
  } catch (...) {
    rethrow_with_prefix("experiment " + spec.name + ": ");
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter w(dir / "metrics.csv", {"experiment", "metric", "measured"});
    for (const auto& m : r.metrics) w.row({r.name, m.name, csv_num(m.value)});
  }
  CsvWriter w(dir / "checks.csv", {"experiment", "metric", "op", "expected", "measured", "pass"});
  for (const auto& c : r.checks)
    w.row({r.name, c.expect.metric, to_string(c.expect.op), csv_num(c.expect.bound), csv_num(c.measured),
           c.pass ? "PASS" : "FAIL"});
}

// ---------------------------------------------------------------------------
// Sensitivity grid

enum class GridAxis { h_star, rho, k, size };

inline GridAxis parse_grid_axis(const std::string& s) {
  if (s == "h_star") return GridAxis::h_star;
  if (s == "rho") return GridAxis::rho;
  if (s == "k") return GridAxis::k;
  if (s == "size") return GridAxis::size;
  throw ConfigError("unknown grid axis '" + s + "' (expected h_star, rho, k or size)");
}

inline std::string to_string(GridAxis a) {
  switch (a) {
    case GridAxis::h_star: return "h_star";
    case GridAxis::rho: return "rho";
    case GridAxis::k: return "k";
    case GridAxis::size: return "size";
  }
  return "?";
}

/// Spec for one grid point. h_star, rho and k change the fit; size is "<nodes>x<times>" for the generator.
inline ExperimentSpec grid_point(const ExperimentSpec& base, GridAxis axis, const std::string& value) {
  auto spec = base;
  spec.name = base.name + "[" + to_string(axis) + "=" + value + "]";
  std::erase_if(spec.expect, [](const Expectation& e) { return !is_grid_metric(e.metric); });
  switch (axis) {
    case GridAxis::h_star: apply_setting(spec, "h_star", value); break;
    case GridAxis::rho: apply_setting(spec, "rho", value); break;
    case GridAxis::k: apply_setting(spec, "k", value); break;
    case GridAxis::size: {
      const auto x = value.find('x');
      if (x == std::string::npos) throw ConfigError("size grid values look like <nodes>x<times>, got '" + value + "'");
      apply_setting(spec, "dgp.nodes", value.substr(0, x));
      apply_setting(spec, "dgp.times", value.substr(x + 1));
      break;
    }
  }
  spec.validate();
  return spec;
}

struct GridCell {
  std::string value;
  std::optional<double> fit_auc;
  std::optional<double> pred_auc;
  std::string error;  // empty when the cell ran
};

struct GridResult {
  std::string name;
  GridAxis axis = GridAxis::h_star;
  std::vector<GridCell> cells;
  std::vector<Metric> metrics;
  std::vector<Check> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
};

/**
 * Table-level metrics: grid_min_fit_auc, grid_min_pred_auc, grid_min_auc (smaller of
 * the two per row), grid_fit_auc_spread, grid_pred_auc_spread, grid_failures.
 * Statistics over cells that ran; a failed cell fails every grid_* check except grid_failures.
 */
inline GridResult sensitivity_grid(const ExperimentSpec& base, GridAxis axis, const std::vector<std::string>& values,
                                   const std::function<void(const GridCell&)>& on_cell = {}) {
  if (values.empty()) throw ConfigError("grid needs at least one value");
  GridResult out;
  out.name = base.name;
  out.axis = axis;
  for (const auto& v : values) {
    GridCell cell{v, {}, {}, {}};
    try {
      const auto r = run_experiment(grid_point(base, axis, v));
      cell.fit_auc = r.metric("fit_auc");
      cell.pred_auc = r.metric("pred_auc");
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    if (on_cell) on_cell(cell);
    out.cells.push_back(std::move(cell));
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> fit, pred, both;
  std::size_t failures = 0;
  for (const auto& c : out.cells) {
    if (!c.error.empty()) {
      ++failures;
      continue;
    }
    fit.push_back(*c.fit_auc);
    if (c.pred_auc) pred.push_back(*c.pred_auc);
    both.push_back(c.pred_auc ? std::min(*c.fit_auc, *c.pred_auc) : *c.fit_auc);
  }
  auto lo = [&](const std::vector<double>& x) { return x.empty() ? nan : *std::min_element(x.begin(), x.end()); };
  auto spread = [&](const std::vector<double>& x) {
    return x.empty() ? nan : *std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end());
  };
  out.metrics = {{"grid_min_fit_auc", lo(fit)},      {"grid_min_pred_auc", lo(pred)},
                 {"grid_min_auc", lo(both)},         {"grid_fit_auc_spread", spread(fit)},
                 {"grid_pred_auc_spread", spread(pred)}, {"grid_failures", static_cast<double>(failures)}};
  for (const auto& e : base.expect) {
    if (!is_grid_metric(e.metric)) continue;
    const auto it = std::find_if(out.metrics.begin(), out.metrics.end(), [&](const Metric& m) { return m.name == e.metric; });
    if (it == out.metrics.end()) throw ConfigError(base.name + ": expect." + e.metric + " is not a grid metric");
    const bool ok = e.holds(it->value) && (e.metric == "grid_failures" || failures == 0);
    out.checks.push_back({e, it->value, ok});
  }
  return out;
}

inline void write_grid(const std::filesystem::path& dir, const GridResult& g) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter w(dir / "grid.csv", {"experiment", to_string(g.axis), "fit_auc", "pred_auc", "error"});
    for (const auto& c : g.cells)
      w.row({g.name, c.value, c.fit_auc ? csv_num(*c.fit_auc) : "NA", c.pred_auc ? csv_num(*c.pred_auc) : "NA", c.error});
  }
  CsvWriter w(dir / "checks.csv", {"experiment", "metric", "op", "expected", "measured", "pass"});
  for (const auto& c : g.checks)
    w.row({g.name, c.expect.metric, to_string(c.expect.op), csv_num(c.expect.bound), csv_num(c.measured),
           c.pass ? "PASS" : "FAIL"});
}

}  // namespace dlsn
