#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dlsn/errors.hpp"
#include "dlsn/evaluate.hpp"

namespace dlsn {

inline std::string csv_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path, std::ios::trunc) {
    if (!out_) throw DataError("cannot write " + path.string());
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) out_ << (k ? "," : "") << csv_field(fields[k]);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Summary report directory:
//   summary.csv      fit_auc, pred_auc, fit_auc_per_draw, draws
//   parameters.csv   one row per scalar (trajectories with HPD bounds)
//   ab.csv           time-averaged posterior means of sender/receiver effects
//   pi_mean.csv      posterior mean probability per cell
//   reciprocity.csv  lag-one reciprocity per ordered pair, strongest first
//   ess.csv          ESS of monitored probability cells

inline void write_summary(const std::filesystem::path& dir, const Summary& s, const NetworkSeries& data,
                          std::size_t draws) {
  std::filesystem::create_directories(dir);
  const auto& labels = data.labels();
  const auto& grid = data.grid();
  {
    CsvWriter w(dir / "summary.csv", {"fit_auc", "pred_auc", "fit_auc_per_draw", "draws"});
    w.row({csv_num(s.scores.fit_auc), s.scores.pred_auc ? csv_num(*s.scores.pred_auc) : "NA",
           csv_num(s.scores.fit_auc_per_draw), std::to_string(draws)});
  }
  {
    CsvWriter w(dir / "parameters.csv", {"name", "index", "time", "mean", "hpd_lo", "hpd_hi", "ess"});
    for (const auto& p : s.params)
      w.row({p.name, std::to_string(p.index1), p.index2 ? csv_num(grid[p.index2 - 1]) : "", csv_num(p.mean),
             csv_num(p.hpd.lo), csv_num(p.hpd.hi), csv_num(p.ess)});
  }
  {
    std::vector<double> a(labels.size(), 0.0), b(labels.size(), 0.0);
    bool any = false;
    for (const auto& p : s.params) {
      if (p.name == "a") a[p.index1 - 1] += p.mean / static_cast<double>(grid.size());
      if (p.name == "b") b[p.index1 - 1] += p.mean / static_cast<double>(grid.size());
      any = any || p.name == "a";
    }
    if (any) {
      CsvWriter w(dir / "ab.csv", {"node", "a_mean", "b_mean"});
      for (std::size_t i = 0; i < labels.size(); ++i) w.row({labels[i], csv_num(a[i]), csv_num(b[i])});
    }
  }
  {
    CsvWriter w(dir / "pi_mean.csv", {"source", "target", "time", "pi_mean", "y"});
    for_each_dyad(data.nodes(), data.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
      const auto y = data.value(i, j, t);
      w.row({labels[i], labels[j], csv_num(grid[t]), csv_num(s.pi_mean(i, j, t)), y ? std::to_string(*y) : "NA"});
    });
  }
  if (!s.reciprocity.empty()) {
    auto rows = s.reciprocity;
    std::stable_sort(rows.begin(), rows.end(), [](const PairSummary& x, const PairSummary& y) { return x.mean > y.mean; });
    CsvWriter w(dir / "reciprocity.csv", {"rank", "source", "target", "mean", "hpd_lo", "hpd_hi"});
    for (std::size_t k = 0; k < rows.size(); ++k)
      w.row({std::to_string(k + 1), labels[rows[k].i], labels[rows[k].j], csv_num(rows[k].mean), csv_num(rows[k].hpd.lo),
             csv_num(rows[k].hpd.hi)});
  }
  {
    CsvWriter w(dir / "ess.csv", {"source", "target", "time", "pi_mean", "ess"});
    for (const auto& c : s.pi_ess)
      w.row({labels[c.i], labels[c.j], csv_num(grid[c.t]), csv_num(c.mean), csv_num(c.ess)});
  }
}

struct Prediction {
  HeldCell cell;
  double mean = 0.0;
  Interval hpd;
};

/// Posterior mean and HPD interval of pi at each held-out cell.
inline std::vector<Prediction> predict_held(const Trace& trace, const std::vector<HeldCell>& held, double level = 0.95) {
  std::vector<Prediction> out;
  std::vector<double> x(trace.draws.size());
  for (const auto& c : held) {
    for (std::size_t d = 0; d < trace.draws.size(); ++d) x[d] = trace.draws[d].pi(c.i, c.j, c.t);
    out.push_back({c, mean_of(x), hpd(x, level)});
  }
  return out;
}

inline void write_predictions(const std::filesystem::path& file, const std::vector<Prediction>& rows,
                              const NetworkSeries& data) {
  CsvWriter w(file, {"source", "target", "time", "pi_mean", "hpd_lo", "hpd_hi", "y"});
  for (const auto& p : rows)
    w.row({data.labels()[p.cell.i], data.labels()[p.cell.j], csv_num(data.grid()[p.cell.t]), csv_num(p.mean),
           csv_num(p.hpd.lo), csv_num(p.hpd.hi), std::to_string(p.cell.y)});
}

}  // namespace dlsn
