#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dlsn/errors.hpp"
#include "dlsn/kernels.hpp"
#include "dlsn/model.hpp"
#include "dlsn/rng.hpp"

namespace dlsn {

enum class DgpVariant { dlsn, dlsn_nocov, lsmdn };

inline std::string to_string(DgpVariant v) {
  switch (v) {
    case DgpVariant::dlsn: return "dlsn";
    case DgpVariant::dlsn_nocov: return "dlsn_nocov";
    case DgpVariant::lsmdn: return "lsmdn";
  }
  return "?";
}

inline DgpVariant parse_dgp_variant(const std::string& s) {
  if (s == "dlsn") return DgpVariant::dlsn;
  if (s == "dlsn_nocov") return DgpVariant::dlsn_nocov;
  if (s == "lsmdn") return DgpVariant::lsmdn;
  throw ConfigError("unknown generator variant '" + s + "'");
}

struct DgpConfig {
  std::size_t nodes = 15;
  std::size_t times = 40;
  std::size_t h_true = 2;
  std::size_t covariates = 1;
  double k_all = 0.01;
  double rho_all = 0.5;
  double covariate_mean = 0.5;
  std::optional<double> k_z;  // defaults to k_all
  DgpVariant variant = DgpVariant::dlsn;

  // lsmdn only
  double beta_in = 3.0;
  double beta_out = 3.0;
  std::size_t lsmdn_dims = 2;
  double step_variance = 0.1;
  std::optional<double> position_sd;     // defaults to 0.5 / nodes
  std::optional<VectorXd> radii;         // defaults to a Dirichlet(1, ..., 1) draw

  std::uint64_t seed = 1;

  double covariate_length_scale() const { return k_z.value_or(k_all); }
  double lsmdn_position_sd() const { return position_sd.value_or(0.5 / static_cast<double>(nodes)); }

  void validate() const {
    if (nodes < 2) throw ConfigError("generator needs at least two nodes");
    if (times < 1) throw ConfigError("generator needs at least one time point");
    if (variant == DgpVariant::lsmdn) {
      if (lsmdn_dims < 1) throw ConfigError("lsmdn latent dimension must be positive");
      if (!(step_variance >= 0.0)) throw ConfigError("lsmdn step variance must be non-negative");
      if (!(lsmdn_position_sd() > 0.0)) throw ConfigError("lsmdn position scale must be positive");
      if (!std::isfinite(beta_in) || !std::isfinite(beta_out)) throw ConfigError("lsmdn betas must be finite");
      if (radii) {
        if (radii->size() != static_cast<Eigen::Index>(nodes)) throw ConfigError("lsmdn radii: one per node");
        if (!(radii->array() > 0.0).all()) throw ConfigError("lsmdn radii must be positive");
      }
      return;
    }
    if (!(k_all > 0.0)) throw ConfigError("k_all must be positive");
    if (!(covariate_length_scale() > 0.0)) throw ConfigError("k_z must be positive");
    if (!(std::abs(rho_all) < 1.0)) throw ConfigError("rho_all must satisfy |rho| < 1");
    if (!std::isfinite(covariate_mean)) throw ConfigError("covariate_mean must be finite");
  }
};

struct LsmdnLatent {
  std::vector<MatrixXd> positions;  // one d x V matrix per time point
  VectorXd radii;
  double beta_in = 0.0;
  double beta_out = 0.0;
};

/// Generating parameters plus the true predictor and probabilities.
struct GroundTruth {
  DgpVariant variant = DgpVariant::dlsn;
  ModelState state;                 // dlsn variants
  std::optional<LsmdnLatent> lsmdn;
  Cube<double> predictor;
  Cube<double> pi;
};

struct SimulatedData {
  NetworkSeries data;
  CovariateSet cov;
  GroundTruth truth;
};

inline std::vector<std::string> default_labels(std::size_t nodes) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < nodes; ++i) out.push_back("v" + std::to_string(i + 1));
  return out;
}

/// S_ij = beta_in (1 - d / r_j) + beta_out (1 - d / r_i).
inline double lsmdn_predictor(double distance, double r_i, double r_j, double beta_in, double beta_out) {
  if (!(r_i > 0.0) || !(r_j > 0.0)) throw ConfigError("lsmdn radii must be positive");
  return beta_in * (1.0 - distance / r_j) + beta_out * (1.0 - distance / r_i);
}

/// Fresh Bernoulli(pi) outcomes on every off-diagonal cell.
inline NetworkSeries draw_outcomes(const Cube<double>& pi, const std::vector<std::string>& labels, const TimeGrid& grid,
                                   Rng& rng) {
  NetworkSeries out(labels, grid);
  for_each_dyad(labels.size(), grid.size(),
                [&](std::size_t i, std::size_t j, std::size_t t) { out.set(i, j, t, rng.bernoulli(pi(i, j, t)) ? 1 : 0); });
  return out;
}

/**
 * @brief Draws a dataset from the DLSN generating process.
 *
 * Draw order: covariate paths (per ordered dyad), mu, beta, then per node
 * (a, b) followed by (x^s, x^r), then outcomes. tau is 1 on the first h_true
 * dimensions; no further dimensions are generated.
 */
inline SimulatedData simulate_dlsn(const DgpConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.variant == DgpVariant::lsmdn) throw ConfigError("simulate_dlsn: variant must be dlsn or dlsn_nocov");
  const std::size_t v = cfg.nodes;
  const std::size_t n = cfg.times;
  const std::size_t p = cfg.variant == DgpVariant::dlsn_nocov ? 0 : cfg.covariates;
  const auto nn = static_cast<Eigen::Index>(n);
  const TimeGrid grid = TimeGrid::integers(n);
  const auto base = chol_jitter(sq_exp_kernel(grid, cfg.k_all).values);

  CovariateSet cov;
  if (p > 0) {
    const auto kz = chol_jitter(sq_exp_kernel(grid, cfg.covariate_length_scale()).values);
    for (std::size_t q = 0; q < p; ++q) {
      Cube<double> z(v, n, 0.0);
      for (std::size_t i = 0; i < v; ++i)
        for (std::size_t j = 0; j < v; ++j) {
          if (i == j) continue;
          const VectorXd path = kz.lower * standard_normal(nn, rng);
          for (std::size_t t = 0; t < n; ++t) z(i, j, t) = cfg.covariate_mean + path(static_cast<Eigen::Index>(t));
        }
      cov.z.push_back(std::move(z));
      cov.labels.push_back("z" + std::to_string(q + 1));
    }
  }

  ModelState s = ModelState::zeros(v, n, p, cfg.h_true, Variant::dlsn);
  s.mu = base.lower * standard_normal(nn, rng);
  for (std::size_t q = 0; q < p; ++q)
    s.beta.row(static_cast<Eigen::Index>(q)) = (base.lower * standard_normal(nn, rng)).transpose();
  const MatrixXd role = KroneckerFactor::role_factor(cfg.rho_all);
  const KroneckerFactor ab(role, VectorXd::Ones(1), base.lower);
  const KroneckerFactor fx(role, VectorXd::Ones(static_cast<Eigen::Index>(cfg.h_true)), base.lower);
  const auto hd = static_cast<Eigen::Index>(cfg.h_true);
  for (std::size_t i = 0; i < v; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const VectorXd d = ab.apply(standard_normal(ab.size(), rng));
    s.a.row(ii) = d.head(nn).transpose();
    s.b.row(ii) = d.tail(nn).transpose();
    if (hd == 0) continue;
    const VectorXd x = fx.apply(standard_normal(fx.size(), rng));
    for (Eigen::Index h = 0; h < hd; ++h) {
      s.xs[i].row(h) = x.segment(h * nn, nn).transpose();
      s.xr[i].row(h) = x.segment((hd + h) * nn, nn).transpose();
    }
  }

  GroundTruth truth;
  truth.variant = cfg.variant;
  truth.predictor = predictor_cube(s, cov);
  truth.pi = Cube<double>(v, n, 0.0);
  for_each_dyad(v, n, [&](std::size_t i, std::size_t j, std::size_t t) {
    truth.pi(i, j, t) = link_probability(truth.predictor(i, j, t));
  });
  truth.state = std::move(s);
  auto data = draw_outcomes(truth.pi, default_labels(v), grid, rng);
  return {std::move(data), std::move(cov), std::move(truth)};
}

/**
 * @brief Draws a dataset from the latent space model with node radii.
 *
 * Positions follow a Gaussian random walk; radii are Dirichlet(1, ..., 1)
 * unless given. Positions are drawn on scale position_sd (increments on
 * sqrt(step_variance) * position_sd) so distances are commensurate with
 * radii that sum to one.
 */
inline SimulatedData simulate_lsmdn(const DgpConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.variant != DgpVariant::lsmdn) throw ConfigError("simulate_lsmdn: variant must be lsmdn");
  const std::size_t v = cfg.nodes;
  const std::size_t n = cfg.times;
  const auto d = static_cast<Eigen::Index>(cfg.lsmdn_dims);
  const auto vv = static_cast<Eigen::Index>(v);
  const double sd0 = cfg.lsmdn_position_sd();
  const double step_sd = std::sqrt(cfg.step_variance) * sd0;

  LsmdnLatent lat;
  lat.beta_in = cfg.beta_in;
  lat.beta_out = cfg.beta_out;
  if (cfg.radii) {
    lat.radii = *cfg.radii;
  } else {
    lat.radii.resize(vv);
    for (Eigen::Index i = 0; i < vv; ++i) lat.radii(i) = rng.gamma(1.0, 1.0);
    lat.radii /= lat.radii.sum();
  }
  if (!(lat.radii.array() > 0.0).all()) throw ConfigError("lsmdn radii must be positive");

  MatrixXd cur(d, vv);
  for (Eigen::Index i = 0; i < cur.size(); ++i) cur.data()[i] = rng.normal(0.0, sd0);
  lat.positions.push_back(cur);
  for (std::size_t t = 1; t < n; ++t) {
    for (Eigen::Index i = 0; i < cur.size(); ++i) cur.data()[i] += rng.normal(0.0, step_sd);
    lat.positions.push_back(cur);
  }

  GroundTruth truth;
  truth.variant = DgpVariant::lsmdn;
  truth.state = ModelState::zeros(v, n, 0, 0, Variant::naive);
  truth.predictor = Cube<double>(v, n, 0.0);
  truth.pi = Cube<double>(v, n, 0.0);
  for_each_dyad(v, n, [&](std::size_t i, std::size_t j, std::size_t t) {
    const auto& x = lat.positions[t];
    const double dist = (x.col(static_cast<Eigen::Index>(i)) - x.col(static_cast<Eigen::Index>(j))).norm();
    const double s = lsmdn_predictor(dist, lat.radii(static_cast<Eigen::Index>(i)),
                                     lat.radii(static_cast<Eigen::Index>(j)), lat.beta_in, lat.beta_out);
    truth.predictor(i, j, t) = s;
    truth.pi(i, j, t) = link_probability(s);
  });
  truth.lsmdn = std::move(lat);
  auto data = draw_outcomes(truth.pi, default_labels(v), TimeGrid::integers(n), rng);
  return {std::move(data), CovariateSet{}, std::move(truth)};
}

inline SimulatedData simulate(const DgpConfig& cfg, Rng& rng) {
  return cfg.variant == DgpVariant::lsmdn ? simulate_lsmdn(cfg, rng) : simulate_dlsn(cfg, rng);
}

inline SimulatedData simulate(const DgpConfig& cfg) {
  Rng rng(cfg.seed);
  return simulate(cfg, rng);
}

// ---------------------------------------------------------------------------
// Holdout

struct HoldoutRule {
  enum class Kind { last_slice, random_cells } kind = Kind::last_slice;
  double fraction = 0.1;
  std::uint64_t seed = 1;

  static HoldoutRule last_slice() { return {}; }
  static HoldoutRule random_cells(double fraction, std::uint64_t seed) { return {Kind::random_cells, fraction, seed}; }
};

inline std::string to_string(const HoldoutRule& r) {
  if (r.kind == HoldoutRule::Kind::last_slice) return "last_slice";
  return "random_cells:" + std::to_string(r.fraction) + ":" + std::to_string(r.seed);
}

struct HeldCell {
  std::size_t i, j, t;
  int y;
  bool operator==(const HeldCell&) const = default;
};

struct HoldoutResult {
  NetworkSeries masked;
  std::vector<HeldCell> held;  // original values, for scoring only
};

/// Masks the cells selected by the rule; only observed cells can be held out.
inline HoldoutResult holdout(const NetworkSeries& data, const HoldoutRule& rule) {
  std::vector<HeldCell> candidates;
  const std::size_t v = data.nodes();
  const std::size_t n = data.times();
  if (rule.kind == HoldoutRule::Kind::last_slice) {
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j)
        if (i != j && data.observed(i, j, n - 1)) candidates.push_back({i, j, n - 1, *data.value(i, j, n - 1)});
  } else {
    if (!(rule.fraction > 0.0 && rule.fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
    std::vector<HeldCell> pool;
    for_each_dyad(v, n, [&](std::size_t i, std::size_t j, std::size_t t) {
      if (data.observed(i, j, t)) pool.push_back({i, j, t, *data.value(i, j, t)});
    });
    const auto count = static_cast<std::size_t>(std::llround(rule.fraction * static_cast<double>(pool.size())));
    // Partial Fisher-Yates with our own index draws, so the selection does not
    // depend on the standard library's shuffle.
    Rng rng(rule.seed);
    for (std::size_t k = 0; k < count && k < pool.size(); ++k) {
      const auto r = k + static_cast<std::size_t>(rng.uniform() * static_cast<double>(pool.size() - k));
      std::swap(pool[k], pool[std::min(r, pool.size() - 1)]);
    }
    pool.resize(std::min(count, pool.size()));
    std::sort(pool.begin(), pool.end(), [](const HeldCell& a, const HeldCell& b) {
      return std::tie(a.t, a.i, a.j) < std::tie(b.t, b.i, b.j);
    });
    candidates = std::move(pool);
  }
  if (candidates.empty()) throw ConfigError("holdout selects no observed cells");
  HoldoutResult out{data, std::move(candidates)};
  for (const auto& c : out.held) out.masked.mask(c.i, c.j, c.t);
  return out;
}

}  // namespace dlsn
