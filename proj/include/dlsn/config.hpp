#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dlsn/errors.hpp"
#include "dlsn/ingest.hpp"
#include "dlsn/sampler.hpp"
#include "dlsn/simulate.hpp"

namespace dlsn {

/// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// Holdout rule text: "last_slice", "random_cells:<fraction>:<seed>" or "none"

inline std::string holdout_text(const std::optional<HoldoutRule>& r) {
  if (!r) return "none";
  if (r->kind == HoldoutRule::Kind::last_slice) return "last_slice";
  return "random_cells:" + format_double(r->fraction) + ":" + std::to_string(r->seed);
}

// ---------------------------------------------------------------------------
// Expectations

enum class CompareOp { ge, gt, le, lt };

inline std::string to_string(CompareOp op) {
  switch (op) {
    case CompareOp::ge: return ">=";
    case CompareOp::gt: return ">";
    case CompareOp::le: return "<=";
    case CompareOp::lt: return "<";
  }
  return "?";
}

struct Expectation {
  std::string metric;
  CompareOp op = CompareOp::ge;
  double bound = 0.0;

  bool holds(double measured) const {
    switch (op) {
      case CompareOp::ge: return measured >= bound;
      case CompareOp::gt: return measured > bound;
      case CompareOp::le: return measured <= bound;
      case CompareOp::lt: return measured < bound;
    }
    return false;
  }
};

// ---------------------------------------------------------------------------
// RunConfig

/**
 * @brief Everything one config file can set.
 *
 * Sampler keys are bare (h_star, k_mu, ..., seed, variant, missing, holdout);
 * generator keys carry a "dgp." prefix; expectations are "expect.<metric> = <op> <value>".
 * `seed` may list several comma-separated seeds, one chain each.
 */
struct RunConfig {
  std::string name = "run";
  HyperConfig hyper;
  std::vector<std::uint64_t> seeds{1};
  std::optional<HoldoutRule> holdout = HoldoutRule::last_slice();
  DgpConfig dgp;
  std::optional<Variant> compare_variant;  // experiments: second fit on the same data
  std::vector<Expectation> expect;

  void validate() const {
    if (name.empty()) throw ConfigError("name must be non-empty");
    if (seeds.empty()) throw ConfigError("seed list is empty");
    hyper.validate();
    dgp.validate();
    if (holdout && holdout->kind == HoldoutRule::Kind::random_cells &&
        !(holdout->fraction > 0.0 && holdout->fraction < 1.0))
      throw ConfigError("holdout fraction must lie in (0, 1)");
  }

  /// HyperConfig for the c-th chain.
  HyperConfig chain(std::size_t c) const {
    HyperConfig h = hyper;
    h.seed = seeds.at(c);
    return h;
  }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

template <typename I>
I parse_int(const std::string& key, const std::string& v) {
  I x{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline std::optional<HoldoutRule> parse_holdout(const std::string& v) {
  if (v == "none") return std::nullopt;
  if (v == "last_slice") return HoldoutRule::last_slice();
  const std::string prefix = "random_cells:";
  if (v.rfind(prefix, 0) == 0) {
    const auto rest = v.substr(prefix.size());
    const auto colon = rest.find(':');
    if (colon != std::string::npos)
      return HoldoutRule::random_cells(parse_double("holdout", rest.substr(0, colon)),
                                       parse_int<std::uint64_t>("holdout", rest.substr(colon + 1)));
  }
  throw ConfigError("holdout: expected last_slice, random_cells:<fraction>:<seed> or none, got '" + v + "'");
}

inline Expectation parse_expectation(const std::string& metric, const std::string& v) {
  Expectation e;
  e.metric = metric;
  std::string rest;
  for (auto [text, op] : {std::pair{">=", CompareOp::ge}, {"<=", CompareOp::le}, {">", CompareOp::gt}, {"<", CompareOp::lt}}) {
    const std::string t = text;
    if (v.rfind(t, 0) == 0) {
      e.op = op;
      rest = trim(v.substr(t.size()));
      e.bound = parse_double("expect." + metric, rest);
      return e;
    }
  }
  throw ConfigError("expect." + metric + ": expected '<op> <value>' with op one of >= > <= <, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["name"] = [](RunConfig& c, const std::string& v) { c.name = v; };
    m["h_star"] = [](RunConfig& c, const std::string& v) { c.hyper.h_star = parse_int<std::size_t>("h_star", v); };
    m["k_mu"] = [](RunConfig& c, const std::string& v) { c.hyper.k_mu = parse_double("k_mu", v); };
    m["k_beta"] = [](RunConfig& c, const std::string& v) { c.hyper.k_beta = parse_double("k_beta", v); };
    m["k_ab"] = [](RunConfig& c, const std::string& v) { c.hyper.k_ab = parse_double("k_ab", v); };
    m["k_x"] = [](RunConfig& c, const std::string& v) { c.hyper.k_x = parse_double("k_x", v); };
    // k and rho set every length scale / both correlations at once
    m["k"] = [](RunConfig& c, const std::string& v) {
      const double k = parse_double("k", v);
      c.hyper.k_mu = c.hyper.k_beta = c.hyper.k_ab = c.hyper.k_x = k;
    };
    m["rho_ab"] = [](RunConfig& c, const std::string& v) { c.hyper.rho_ab = parse_double("rho_ab", v); };
    m["rho_x"] = [](RunConfig& c, const std::string& v) { c.hyper.rho_x = parse_double("rho_x", v); };
    m["rho"] = [](RunConfig& c, const std::string& v) { c.hyper.rho_ab = c.hyper.rho_x = parse_double("rho", v); };
    m["shrink_a"] = [](RunConfig& c, const std::string& v) { c.hyper.shrink_a = parse_double("shrink_a", v); };
    m["iterations"] = [](RunConfig& c, const std::string& v) { c.hyper.iterations = parse_int<long>("iterations", v); };
    m["burn_in"] = [](RunConfig& c, const std::string& v) { c.hyper.burn_in = parse_int<long>("burn_in", v); };
    m["thin"] = [](RunConfig& c, const std::string& v) { c.hyper.thin = parse_int<long>("thin", v); };
    m["seed"] = [](RunConfig& c, const std::string& v) {
      c.seeds.clear();
      for (const auto& s : split_list(v)) c.seeds.push_back(parse_int<std::uint64_t>("seed", s));
      if (c.seeds.empty()) throw ConfigError("seed: empty list");
      c.hyper.seed = c.seeds.front();
    };
    m["variant"] = [](RunConfig& c, const std::string& v) { c.hyper.variant = parse_variant(v); };
    m["missing"] = [](RunConfig& c, const std::string& v) { c.hyper.missing = parse_missing_policy(v); };
    m["holdout"] = [](RunConfig& c, const std::string& v) { c.holdout = parse_holdout(v); };
    m["compare_variant"] = [](RunConfig& c, const std::string& v) {
      if (v == "none") c.compare_variant.reset();
      else c.compare_variant = parse_variant(v);
    };

    m["dgp.nodes"] = [](RunConfig& c, const std::string& v) { c.dgp.nodes = parse_int<std::size_t>("dgp.nodes", v); };
    m["dgp.times"] = [](RunConfig& c, const std::string& v) { c.dgp.times = parse_int<std::size_t>("dgp.times", v); };
    m["dgp.h_true"] = [](RunConfig& c, const std::string& v) { c.dgp.h_true = parse_int<std::size_t>("dgp.h_true", v); };
    m["dgp.covariates"] = [](RunConfig& c, const std::string& v) {
      c.dgp.covariates = parse_int<std::size_t>("dgp.covariates", v);
    };
    m["dgp.k_all"] = [](RunConfig& c, const std::string& v) { c.dgp.k_all = parse_double("dgp.k_all", v); };
    m["dgp.rho_all"] = [](RunConfig& c, const std::string& v) { c.dgp.rho_all = parse_double("dgp.rho_all", v); };
    m["dgp.covariate_mean"] = [](RunConfig& c, const std::string& v) {
      c.dgp.covariate_mean = parse_double("dgp.covariate_mean", v);
    };
    m["dgp.k_z"] = [](RunConfig& c, const std::string& v) {
      if (v == "default") c.dgp.k_z.reset();
      else c.dgp.k_z = parse_double("dgp.k_z", v);
    };
    m["dgp.variant"] = [](RunConfig& c, const std::string& v) { c.dgp.variant = parse_dgp_variant(v); };
    m["dgp.beta_in"] = [](RunConfig& c, const std::string& v) { c.dgp.beta_in = parse_double("dgp.beta_in", v); };
    m["dgp.beta_out"] = [](RunConfig& c, const std::string& v) { c.dgp.beta_out = parse_double("dgp.beta_out", v); };
    m["dgp.lsmdn_dims"] = [](RunConfig& c, const std::string& v) {
      c.dgp.lsmdn_dims = parse_int<std::size_t>("dgp.lsmdn_dims", v);
    };
    m["dgp.step_variance"] = [](RunConfig& c, const std::string& v) {
      c.dgp.step_variance = parse_double("dgp.step_variance", v);
    };
    m["dgp.position_sd"] = [](RunConfig& c, const std::string& v) {
      if (v == "default") c.dgp.position_sd.reset();
      else c.dgp.position_sd = parse_double("dgp.position_sd", v);
    };
    m["dgp.radii"] = [](RunConfig& c, const std::string& v) {
      if (v == "default") {
        c.dgp.radii.reset();
        return;
      }
      const auto items = split_list(v);
      VectorXd r(static_cast<Eigen::Index>(items.size()));
      for (std::size_t k = 0; k < items.size(); ++k) r(static_cast<Eigen::Index>(k)) = parse_double("dgp.radii", items[k]);
      c.dgp.radii = r;
    };
    m["dgp.seed"] = [](RunConfig& c, const std::string& v) { c.dgp.seed = parse_int<std::uint64_t>("dgp.seed", v); };
    return m;
  }();
  return table;
}

}  // namespace detail

inline std::optional<HoldoutRule> parse_holdout_text(const std::string& v) { return detail::parse_holdout(v); }

/// Applies one key = value pair.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  if (key.rfind("expect.", 0) == 0) {
    const auto metric = key.substr(7);
    if (metric.empty()) throw ConfigError("expect.: missing metric name");
    std::erase_if(c.expect, [&](const Expectation& e) { return e.metric == metric; });
    c.expect.push_back(detail::parse_expectation(metric, value));
    return;
  }
  const auto& table = detail::setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(c, value);
}

/// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
inline RunConfig parse_config(std::istream& in, const std::string& source = "config", RunConfig base = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    try {
      apply_setting(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const std::exception& e) {
      throw ConfigError(where + e.what());
    }
  }
  base.validate();
  return base;
}

inline RunConfig parse_config_text(const std::string& text, const std::string& source = "config") {
  std::istringstream in(text);
  return parse_config(in, source);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in, path);
}

/// Every key with its resolved value, in a fixed order; parses back to the same config.
inline std::string config_text(const RunConfig& c) {
  std::ostringstream o;
  auto kv = [&](const std::string& k, const std::string& v) { o << k << " = " << v << "\n"; };
  const auto& h = c.hyper;
  kv("name", c.name);
  kv("h_star", std::to_string(h.h_star));
  kv("k_mu", format_double(h.k_mu));
  kv("k_beta", format_double(h.k_beta));
  kv("k_ab", format_double(h.k_ab));
  kv("k_x", format_double(h.k_x));
  kv("rho_ab", format_double(h.rho_ab));
  kv("rho_x", format_double(h.rho_x));
  kv("shrink_a", format_double(h.shrink_a));
  kv("iterations", std::to_string(h.iterations));
  kv("burn_in", std::to_string(h.burn_in));
  kv("thin", std::to_string(h.thin));
  std::string seeds;
  for (std::size_t k = 0; k < c.seeds.size(); ++k) seeds += (k ? "," : "") + std::to_string(c.seeds[k]);
  kv("seed", seeds);
  kv("variant", to_string(h.variant));
  kv("missing", to_string(h.missing));
  kv("holdout", holdout_text(c.holdout));
  kv("compare_variant", c.compare_variant ? to_string(*c.compare_variant) : "none");
  const auto& d = c.dgp;
  kv("dgp.variant", to_string(d.variant));
  kv("dgp.nodes", std::to_string(d.nodes));
  kv("dgp.times", std::to_string(d.times));
  kv("dgp.h_true", std::to_string(d.h_true));
  kv("dgp.covariates", std::to_string(d.covariates));
  kv("dgp.k_all", format_double(d.k_all));
  kv("dgp.rho_all", format_double(d.rho_all));
  kv("dgp.covariate_mean", format_double(d.covariate_mean));
  kv("dgp.k_z", d.k_z ? format_double(*d.k_z) : "default");
  kv("dgp.beta_in", format_double(d.beta_in));
  kv("dgp.beta_out", format_double(d.beta_out));
  kv("dgp.lsmdn_dims", std::to_string(d.lsmdn_dims));
  kv("dgp.step_variance", format_double(d.step_variance));
  kv("dgp.position_sd", d.position_sd ? format_double(*d.position_sd) : "default");
  std::string radii = "default";
  if (d.radii) {
    radii.clear();
    for (Eigen::Index k = 0; k < d.radii->size(); ++k) radii += (k ? "," : "") + format_double((*d.radii)(k));
  }
  kv("dgp.radii", radii);
  kv("dgp.seed", std::to_string(d.seed));
  for (const auto& e : c.expect) kv("expect." + e.metric, to_string(e.op) + " " + format_double(e.bound));
  return o.str();
}

}  // namespace dlsn
