#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dlsn/errors.hpp"
#include "dlsn/model.hpp"

namespace dlsn {

// ---------------------------------------------------------------------------
// CSV

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Splits one CSV record. Double quotes group fields and "" escapes a quote;
/// fields are trimmed.
inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw DataError("unterminated quote");
  out.push_back(trim(cur));
  return out;
}

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw DataError(path + ": missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  CsvTable t;
  t.path = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = split_csv(line);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    t.rows.emplace_back(lineno, std::move(fields));
  }
  if (t.header.empty()) throw DataError(path + ": empty file");
  return t;
}

// ---------------------------------------------------------------------------
// Dates and bins

using Date = std::chrono::year_month_day;

/// YYYY-MM-DD, optionally followed by a time part after 'T' or a space.
inline Date parse_date(std::string_view s) {
  const auto cut = s.find_first_of("T ");
  if (cut != std::string_view::npos) s = s.substr(0, cut);
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::string_view part, auto& out) {
    const auto r = std::from_chars(part.data(), part.data() + part.size(), out);
    return r.ec == std::errc() && r.ptr == part.data() + part.size() && !part.empty();
  };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !num(s.substr(0, 4), y) || !num(s.substr(5, 2), m) ||
      !num(s.substr(8, 2), d))
    throw DataError("unparseable date '" + std::string(s) + "'");
  const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw DataError("invalid calendar date '" + std::string(s) + "'");
  return date;
}

enum class BinWidth { month, quarter, year };

inline BinWidth parse_bin_width(const std::string& s) {
  if (s == "month") return BinWidth::month;
  if (s == "quarter") return BinWidth::quarter;
  if (s == "year") return BinWidth::year;
  throw ConfigError("unknown bin width '" + s + "' (expected month, quarter or year)");
}

inline int months_per_bin(BinWidth w) { return w == BinWidth::month ? 1 : w == BinWidth::quarter ? 3 : 12; }

/// Calendar period index: months, quarters or years since year 0.
inline long period_of(const Date& d, BinWidth w) {
  const long months = static_cast<long>(static_cast<int>(d.year())) * 12 + static_cast<long>(static_cast<unsigned>(d.month())) - 1;
  return months / months_per_bin(w);
}

inline std::string period_label(long period, BinWidth w) {
  char buf[32];
  const long months = period * months_per_bin(w);
  const long year = months / 12;
  if (w == BinWidth::year) std::snprintf(buf, sizeof buf, "%ld", year);
  else if (w == BinWidth::quarter) std::snprintf(buf, sizeof buf, "%ldQ%ld", year, months % 12 / 3 + 1);
  else std::snprintf(buf, sizeof buf, "%ld-%02ld", year, months % 12 + 1);
  return buf;
}

/**
 * @brief Observation window: inclusive dates, calendar-aligned bins, ordered nodes.
 *
 * Bin t covers the t-th calendar period from the one containing `start`, so a
 * window 2004-01-01 .. 2013-12-31 with quarterly bins has 40 bins.
 */
struct WindowSpec {
  Date start;
  Date end;
  BinWidth bin = BinWidth::quarter;
  std::vector<std::string> nodes;

  void validate() const {
    if (!(std::chrono::sys_days(start) < std::chrono::sys_days(end))) throw ConfigError("window start must precede end");
    if (nodes.size() < 2) throw ConfigError("node whitelist needs at least two nodes");
    std::map<std::string, int> seen;
    for (const auto& n : nodes)
      if (++seen[n] > 1) throw ConfigError("duplicate node '" + n + "' in whitelist");
  }

  std::size_t bins() const { return static_cast<std::size_t>(period_of(end, bin) - period_of(start, bin) + 1); }

  std::vector<std::string> bin_labels() const {
    std::vector<std::string> out;
    const long first = period_of(start, bin);
    for (std::size_t t = 0; t < bins(); ++t) out.push_back(period_label(first + static_cast<long>(t), bin));
    return out;
  }

  bool contains(const Date& d) const {
    const auto x = std::chrono::sys_days(d);
    return x >= std::chrono::sys_days(start) && x <= std::chrono::sys_days(end);
  }

  std::size_t bin_of(const Date& d) const { return static_cast<std::size_t>(period_of(d, bin) - period_of(start, bin)); }

  std::optional<std::size_t> node_index(const std::string& label) const {
    for (std::size_t k = 0; k < nodes.size(); ++k)
      if (nodes[k] == label) return k;
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Events

struct IngestReport {
  std::size_t rows = 0;
  std::size_t kept = 0;
  std::size_t self_loops = 0;
  std::size_t outside_whitelist = 0;
  std::size_t outside_window = 0;
};

struct IngestedNetwork {
  NetworkSeries data;
  std::vector<std::string> bin_labels;
  IngestReport report;
};

/// events CSV (source,target,date) to a fully observed binary series:
/// a cell is 1 iff at least one event from source to target falls in its bin.
inline IngestedNetwork ingest_events(const std::string& path, const WindowSpec& w) {
  w.validate();
  const auto csv = read_csv(path);
  const auto cs = csv.column("source"), ct = csv.column("target"), cd = csv.column("date");
  IngestedNetwork out{NetworkSeries(w.nodes, TimeGrid::integers(w.bins())), w.bin_labels(), {}};
  const std::size_t v = w.nodes.size(), n = w.bins();
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j)
        if (i != j) out.data.set(i, j, t, 0);
  auto& rep = out.report;
  for (const auto& [line, f] : csv.rows) {
    ++rep.rows;
    Date d;
    try {
      d = parse_date(f[cd]);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
    }
    if (f[cs].empty() || f[ct].empty()) throw DataError(path + ":" + std::to_string(line) + ": empty node label");
    if (f[cs] == f[ct]) {
      ++rep.self_loops;
      continue;
    }
    const auto i = w.node_index(f[cs]), j = w.node_index(f[ct]);
    if (!i || !j) {
      ++rep.outside_whitelist;
      continue;
    }
    if (!w.contains(d)) {
      ++rep.outside_window;
      continue;
    }
    ++rep.kept;
    out.data.set(*i, *j, w.bin_of(d), 1);
  }
  if (rep.kept == 0) throw DomainError(path + ": no events fall inside the window and whitelist");
  return out;
}

// ---------------------------------------------------------------------------
// Covariates

/**
 * covariates CSV (node,bin,value) to two dyadic covariates,
 * log value of the source and of the target at bin t - lag.
 *
 * `bin` is either a period label ("2004Q1") or a 1-based bin number. The
 * first `lag` bins have no lagged value, so the result covers bins
 * lag+1 .. N; trim the network to match with drop_front_bins.
 */
inline CovariateSet ingest_covariates(const std::string& path, const WindowSpec& w, std::size_t lag) {
  w.validate();
  const std::size_t v = w.nodes.size(), n = w.bins();
  if (lag >= n) throw ConfigError("lag leaves no usable bins");
  const auto csv = read_csv(path);
  const auto cn = csv.column("node"), cb = csv.column("bin"), cv = csv.column("value");
  const auto labels = w.bin_labels();
  std::map<std::string, std::size_t> by_label;
  for (std::size_t t = 0; t < n; ++t) by_label[labels[t]] = t;

  std::vector<std::optional<double>> logv(v * n);
  for (const auto& [line, f] : csv.rows) {
    const auto where = path + ":" + std::to_string(line) + ": ";
    const auto i = w.node_index(f[cn]);
    if (!i) continue;
    std::size_t t = 0;
    if (auto it = by_label.find(f[cb]); it != by_label.end()) {
      t = it->second;
    } else {
      long k = 0;
      const auto r = std::from_chars(f[cb].data(), f[cb].data() + f[cb].size(), k);
      if (r.ec != std::errc() || r.ptr != f[cb].data() + f[cb].size()) throw DataError(where + "unknown bin '" + f[cb] + "'");
      if (k < 1 || static_cast<std::size_t>(k) > n) continue;  // outside the window
      t = static_cast<std::size_t>(k - 1);
    }
    double x = 0.0;
    const auto r = std::from_chars(f[cv].data(), f[cv].data() + f[cv].size(), x);
    if (r.ec != std::errc() || r.ptr != f[cv].data() + f[cv].size() || !std::isfinite(x))
      throw DataError(where + "unparseable value '" + f[cv] + "'");
    if (x <= 0.0) throw DataError(where + "non-positive value for node " + f[cn] + ", bin " + labels[t]);
    auto& slot = logv[*i * n + t];
    if (slot) throw DataError(where + "duplicate value for node " + f[cn] + ", bin " + labels[t]);
    slot = std::log(x);
  }

  const std::size_t usable = n - lag;
  CovariateSet cov;
  cov.labels = {"log_value_source", "log_value_target"};
  cov.z.assign(2, Cube<double>(v, usable, 0.0));
  for (std::size_t t = 0; t < usable; ++t)
    for (std::size_t i = 0; i < v; ++i)
      if (!logv[i * n + t]) throw DataError(path + ": missing value for node " + w.nodes[i] + ", bin " + labels[t]);
  for (std::size_t t = 0; t < usable; ++t)
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j) {
        if (i == j) continue;
        cov.z[0](i, j, t) = *logv[i * n + t];
        cov.z[1](i, j, t) = *logv[j * n + t];
      }
  return cov;
}

/// Drops the first k bins, keeping the remaining grid points and observations.
inline NetworkSeries drop_front_bins(const NetworkSeries& d, std::size_t k) {
  if (k >= d.times()) throw ConfigError("cannot drop every bin");
  std::vector<double> g(d.grid().times().begin() + static_cast<std::ptrdiff_t>(k), d.grid().times().end());
  NetworkSeries out(d.labels(), TimeGrid(std::move(g)));
  for (std::size_t t = k; t < d.times(); ++t)
    for (std::size_t i = 0; i < d.nodes(); ++i)
      for (std::size_t j = 0; j < d.nodes(); ++j)
        if (auto y = d.value(i, j, t)) out.set(i, j, t - k, *y);
  return out;
}

}  // namespace dlsn
