#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dlsn/errors.hpp"
#include "dlsn/model.hpp"
#include "dlsn/sampler.hpp"
#include "dlsn/simulate.hpp"

namespace dlsn {

/// Mann-Whitney AUC via midranks; ties count one half.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ConfigError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    while (e + 1 < n && scores[order[e + 1]] == scores[order[k]]) ++e;
    const double midrank = 0.5 * static_cast<double>(k + e) + 1.0;
    for (std::size_t m = k; m <= e; ++m)
      if (labels[order[m]] != 0) {
        rank_sum += midrank;
        pos += 1.0;
      }
    k = e + 1;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw DomainError("auc needs both positive and negative labels");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Shortest window holding ceil(level * n) sorted samples; first one on ties.
inline Interval hpd(std::vector<double> samples, double level = 0.95) {
  const std::size_t n = samples.size();
  if (n < 20) throw DomainError("hpd needs at least 20 samples");
  if (!(level > 0.0 && level <= 1.0)) throw ConfigError("hpd level must lie in (0, 1]");
  std::sort(samples.begin(), samples.end());
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9)));
  std::size_t best = 0;
  double width = samples[m - 1] - samples[0];
  for (std::size_t k = 1; k + m <= n; ++k) {
    const double w = samples[k + m - 1] - samples[k];
    if (w < width) {
      width = w;
      best = k;
    }
  }
  return {samples[best], samples[best + m - 1]};
}

inline double mean_of(const std::vector<double>& x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/**
 * @brief Effective sample size n / tau.
 *
 * tau = -1 + 2 sum_m Gamma_m over Geyer's initial positive (and monotone)
 * sequence of paired autocorrelations Gamma_m = rho_2m + rho_2m+1, floored at
 * 1 / log10(n) so antithetic chains give a finite ESS above n.
 */
inline double ess(const std::vector<double>& chain) {
  const std::size_t n = chain.size();
  if (n < 50) throw DomainError("ess needs at least 50 draws");
  const double m = mean_of(chain);
  double c0 = 0.0;
  for (double x : chain) c0 += (x - m) * (x - m);
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return static_cast<double>(n);
  auto rho = [&](std::size_t k) {
    double c = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) c += (chain[i] - m) * (chain[i + k] - m);
    return c / static_cast<double>(n) / c0;
  };
  double tau = -1.0;
  double prev = INFINITY;
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    double g = rho(k) + rho(k + 1);
    if (g <= 0.0) break;
    g = std::min(g, prev);
    tau += 2.0 * g;
    prev = g;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

// ---------------------------------------------------------------------------
// Posterior summaries

inline Cube<double> posterior_mean_pi(const Trace& trace) {
  if (trace.draws.empty()) throw DomainError("trace holds no draws");
  const auto& first = trace.draws.front().pi;
  Cube<double> out(first.nodes(), first.times(), 0.0);
  for (const auto& d : trace.draws)
    for (std::size_t k = 0; k < out.size(); ++k) out.raw()[k] += d.pi.raw()[k];
  for (auto& x : out.raw()) x /= static_cast<double>(trace.draws.size());
  return out;
}

struct FitScores {
  double fit_auc = 0.0;
  std::optional<double> pred_auc;
  double fit_auc_per_draw = 0.0;  // mean over draws of the per-draw AUC
};

/// fit AUC on observed cells of `data`, prediction AUC on the held-out cells.
inline FitScores score_fit(const Cube<double>& pi_hat, const NetworkSeries& data, const std::vector<HeldCell>& held) {
  std::vector<double> s;
  std::vector<int> y;
  for_each_dyad(data.nodes(), data.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
    if (const auto v = data.value(i, j, t)) {
      s.push_back(pi_hat(i, j, t));
      y.push_back(*v);
    }
  });
  FitScores out;
  out.fit_auc = auc(s, y);
  out.fit_auc_per_draw = out.fit_auc;
  if (!held.empty()) {
    std::vector<double> hs;
    std::vector<int> hy;
    for (const auto& c : held) {
      hs.push_back(pi_hat(c.i, c.j, c.t));
      hy.push_back(c.y);
    }
    out.pred_auc = auc(hs, hy);
  }
  return out;
}

inline FitScores score_fit(const Trace& trace, const NetworkSeries& data, const std::vector<HeldCell>& held) {
  auto out = score_fit(posterior_mean_pi(trace), data, held);
  double acc = 0.0;
  for (const auto& d : trace.draws) acc += score_fit(d.pi, data, {}).fit_auc;
  out.fit_auc_per_draw = acc / static_cast<double>(trace.draws.size());
  return out;
}

struct PairSummary {
  std::size_t i = 0;
  std::size_t j = 0;
  double mean = 0.0;
  Interval hpd;
};

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// corr over t = 2..N of S_ij(t) and S_ji(t - 1) for one predictor cube.
inline double lag_one_reciprocity(const Cube<double>& s, std::size_t i, std::size_t j) {
  std::vector<double> x, y;
  for (std::size_t t = 1; t < s.times(); ++t) {
    x.push_back(s(i, j, t));
    y.push_back(s(j, i, t - 1));
  }
  return pearson(x, y);
}

/// Per ordered pair, per-draw lag-one reciprocity summarized by mean and 95% HPD.
/// `next` yields the predictor cube of draw d = 0, 1, ..., draws - 1.
template <typename NextCube>
std::vector<PairSummary> temporal_reciprocity(std::size_t draws, NextCube&& next) {
  if (draws == 0) throw DomainError("temporal_reciprocity needs draws");
  std::vector<std::vector<double>> r;
  std::size_t v = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const Cube<double> s = next(d);
    if (d == 0) {
      if (s.times() < 3) throw DomainError("temporal_reciprocity needs at least three time points");
      v = s.nodes();
      r.assign(v * v, std::vector<double>(draws, 0.0));
    }
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j)
        if (i != j) r[i * v + j][d] = lag_one_reciprocity(s, i, j);
  }
  std::vector<PairSummary> out;
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = 0; j < v; ++j)
      if (i != j) out.push_back({i, j, mean_of(r[i * v + j]), hpd(r[i * v + j])});
  return out;
}

inline std::vector<PairSummary> temporal_reciprocity(const std::vector<Cube<double>>& predictors) {
  return temporal_reciprocity(predictors.size(), [&](std::size_t d) { return predictors[d]; });
}

/// Predictors recomputed from each stored draw's state.
inline std::vector<PairSummary> temporal_reciprocity(const Trace& trace, const CovariateSet& cov) {
  return temporal_reciprocity(trace.draws.size(), [&](std::size_t d) {
    return predictor_cube(trace.draws[d].state(trace.config.variant), cov);
  });
}

struct ParamSummary {
  std::string name;
  std::size_t index1 = 0;  // node or covariate/dimension, 1-based in reports
  std::size_t index2 = 0;  // time point, 1-based; 0 when not time-indexed
  double mean = 0.0;
  Interval hpd;
  double ess = 0.0;
};

inline ParamSummary summarize_scalar(std::string name, std::size_t i1, std::size_t i2, const std::vector<double>& x) {
  return {std::move(name), i1, i2, mean_of(x), hpd(x), ess(x)};
}

struct CellEss {
  std::size_t i = 0, j = 0, t = 0;
  double mean = 0.0;
  double ess = 0.0;
};

struct Summary {
  std::vector<ParamSummary> params;
  Cube<double> pi_mean;
  FitScores scores;
  std::vector<CellEss> pi_ess;  // monitored pi cells
  std::vector<PairSummary> reciprocity;
};

/// Evenly spaced subset of at most `limit` off-diagonal cells.
inline std::vector<HeldCell> monitored_cells(std::size_t nodes, std::size_t times, std::size_t limit) {
  std::vector<HeldCell> all;
  for_each_dyad(nodes, times, [&](std::size_t i, std::size_t j, std::size_t t) { all.push_back({i, j, t, 0}); });
  if (limit == 0 || all.size() <= limit) return all;
  std::vector<HeldCell> out;
  for (std::size_t k = 0; k < limit; ++k) out.push_back(all[k * all.size() / limit]);
  return out;
}

/**
 * @brief Posterior summary of a trace.
 *
 * Needs at least 50 saved draws (ESS) and covariates matching the fit.
 */
inline Summary summarize_trace(const Trace& trace, const NetworkSeries& data, const CovariateSet& cov,
                               const std::vector<HeldCell>& held, std::size_t ess_cells = 1000) {
  if (trace.draws.size() < 50) throw DomainError("summaries need at least 50 saved draws");
  Summary out;
  const auto& first = trace.draws.front();
  const auto n = static_cast<std::size_t>(first.mu.size());
  const auto v = static_cast<std::size_t>(first.a.rows());
  std::vector<double> x(trace.draws.size());
  auto collect = [&](auto&& f) {
    for (std::size_t d = 0; d < trace.draws.size(); ++d) x[d] = f(trace.draws[d]);
    return x;
  };
  for (std::size_t t = 0; t < n; ++t) {
    const auto tt = static_cast<Eigen::Index>(t);
    out.params.push_back(summarize_scalar("mu", 0, t + 1, collect([&](const Draw& d) { return d.mu(tt); })));
  }
  for (Eigen::Index p = 0; p < first.beta.rows(); ++p)
    for (std::size_t t = 0; t < n; ++t) {
      const auto tt = static_cast<Eigen::Index>(t);
      out.params.push_back(summarize_scalar("beta", static_cast<std::size_t>(p) + 1, t + 1,
                                            collect([&](const Draw& d) { return d.beta(p, tt); })));
    }
  for (Eigen::Index h = 0; h < first.tau.size(); ++h)
    out.params.push_back(summarize_scalar("tau_inv", static_cast<std::size_t>(h) + 1, 0,
                                          collect([&](const Draw& d) { return 1.0 / d.tau(h); })));
  if (has_network_effects(trace.config.variant))
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t t = 0; t < n; ++t) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto tt = static_cast<Eigen::Index>(t);
        out.params.push_back(summarize_scalar("a", i + 1, t + 1, collect([&](const Draw& d) { return d.a(ii, tt); })));
        out.params.push_back(summarize_scalar("b", i + 1, t + 1, collect([&](const Draw& d) { return d.b(ii, tt); })));
      }
  if (trace.config.variant == Variant::random_effect)
    out.params.push_back(summarize_scalar("sigma2_eps", 0, 0, collect([](const Draw& d) { return d.sigma2_eps; })));

  out.pi_mean = posterior_mean_pi(trace);
  out.scores = score_fit(trace, data, held);
  for (const auto& c : monitored_cells(v, n, ess_cells)) {
    collect([&](const Draw& d) { return d.pi(c.i, c.j, c.t); });
    out.pi_ess.push_back({c.i, c.j, c.t, mean_of(x), ess(x)});
  }
  if (n >= 3) out.reciprocity = temporal_reciprocity(trace, cov);
  return out;
}

}  // namespace dlsn
