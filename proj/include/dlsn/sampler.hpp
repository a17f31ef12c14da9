#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dlsn/errors.hpp"
#include "dlsn/kernels.hpp"
#include "dlsn/model.hpp"
#include "dlsn/polya_gamma.hpp"
#include "dlsn/rng.hpp"

namespace dlsn {

/// How unobserved cells enter the likelihood.
enum class MissingPolicy {
  impute,       // imputed working values are treated as data (refreshed every sweep)
  marginalize,  // unobserved cells are dropped from every conditional
};

inline std::string to_string(MissingPolicy m) { return m == MissingPolicy::impute ? "impute" : "marginalize"; }

inline MissingPolicy parse_missing_policy(const std::string& s) {
  if (s == "impute") return MissingPolicy::impute;
  if (s == "marginalize") return MissingPolicy::marginalize;
  throw ConfigError("unknown missing-data policy '" + s + "'");
}

struct HyperConfig {
  std::size_t h_star = 10;
  double k_mu = 0.1;
  double k_beta = 0.1;
  double k_ab = 0.1;
  double k_x = 0.1;
  double rho_ab = 0.5;
  double rho_x = 0.5;
  double shrink_a = 2.0;
  long iterations = 50000;
  long burn_in = 5000;
  long thin = 10;
  std::uint64_t seed = 1;
  Variant variant = Variant::dlsn;
  MissingPolicy missing = MissingPolicy::impute;

  void validate() const {
    if (h_star < 1) throw ConfigError("h_star must be a positive integer");
    for (double k : {k_mu, k_beta, k_ab, k_x})
      if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("length scales must be positive");
    for (double r : {rho_ab, rho_x})
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError("correlations must lie in [0, 1)");
    if (!(shrink_a > 0.0)) throw ConfigError("shrink_a must be positive");
    if (iterations < 1 || burn_in < 0 || thin < 1) throw ConfigError("iterations, burn_in, thin must be positive");
    if (burn_in >= iterations) throw ConfigError("burn_in must be smaller than iterations");
  }

  long saved_draws() const { return (iterations - burn_in) / thin; }
};

/// Temporal kernel factors, built once per run (length scales are fixed).
struct PriorCache {
  CholFactor mu;
  CholFactor beta;
  CholFactor ab;
  CholFactor x;
  MatrixXd role_ab;
  MatrixXd role_x;

  static PriorCache build(const TimeGrid& grid, const HyperConfig& cfg) {
    return {chol_jitter(sq_exp_kernel(grid, cfg.k_mu).values),
            chol_jitter(sq_exp_kernel(grid, cfg.k_beta).values),
            chol_jitter(sq_exp_kernel(grid, cfg.k_ab).values),
            chol_jitter(sq_exp_kernel(grid, cfg.k_x).values),
            KroneckerFactor::role_factor(cfg.rho_ab),
            KroneckerFactor::role_factor(cfg.rho_x)};
  }
};

/// Read-only inputs shared by every Gibbs step.
class GibbsContext {
 public:
  GibbsContext(const NetworkSeries& data, const CovariateSet& cov, HyperConfig config)
      : data_(&data), cov_(&cov), config_(std::move(config)) {
    config_.validate();
    cov.validate(data.nodes(), data.times());
    if (data.nodes() < 2) throw ConfigError("network needs at least two nodes");
    priors_ = PriorCache::build(data.grid(), config_);
  }

  const NetworkSeries& data() const { return *data_; }
  const CovariateSet& cov() const { return *cov_; }
  const HyperConfig& config() const { return config_; }
  const PriorCache& priors() const { return priors_; }
  std::size_t nodes() const { return data_->nodes(); }
  std::size_t times() const { return data_->times(); }

  /// Whether cell (i, j, t) contributes to the likelihood.
  bool active(std::size_t i, std::size_t j, std::size_t t) const {
    return config_.missing == MissingPolicy::impute || data_->observed(i, j, t);
  }

 private:
  const NetworkSeries* data_;
  const CovariateSet* cov_;
  HyperConfig config_;
  PriorCache priors_;
};

namespace detail {

inline std::vector<MatrixXd> scalar_blocks(const VectorXd& d) {
  std::vector<MatrixXd> out(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) out[static_cast<std::size_t>(i)] = MatrixXd::Constant(1, 1, d(i));
  return out;
}

inline double kappa(const ModelState& s, std::size_t i, std::size_t j, std::size_t t) {
  return static_cast<double>(s.y(i, j, t)) - 0.5;
}

inline KroneckerFactor temporal_only(const CholFactor& f) {
  return KroneckerFactor(MatrixXd::Ones(1, 1), VectorXd::Ones(1), f.lower);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Step 1: Polya-Gamma weights

inline void step_pg_weights(ModelState& s, const GibbsContext& ctx, Rng& rng) {
  for_each_dyad(ctx.nodes(), ctx.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
    s.w(i, j, t) = sample_pg1(linear_predictor(s, ctx.cov(), i, j, t), rng);
  });
}

// ---------------------------------------------------------------------------
// Step 2: intercept mu(.)

inline WhitenedGaussian mu_conditional(const ModelState& s, const GibbsContext& ctx) {
  const auto n = static_cast<Eigen::Index>(ctx.times());
  VectorXd prec = VectorXd::Zero(n);
  VectorXd lin = VectorXd::Zero(n);
  for_each_dyad(ctx.nodes(), ctx.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
    if (!ctx.active(i, j, t)) return;
    const auto tt = static_cast<Eigen::Index>(t);
    const double w = s.w(i, j, t);
    prec(tt) += w;
    lin(tt) += detail::kappa(s, i, j, t) - w * (linear_predictor(s, ctx.cov(), i, j, t) - s.mu(tt));
  });
  const auto factor = detail::temporal_only(ctx.priors().mu);
  return WhitenedGaussian(factor, factor.whitened_precision(detail::scalar_blocks(prec)), lin);
}

inline void step_mu(ModelState& s, const GibbsContext& ctx, Rng& rng) { s.mu = mu_conditional(s, ctx).draw(rng); }

// ---------------------------------------------------------------------------
// Step 3: covariate coefficients beta_p(.), p ascending

inline WhitenedGaussian beta_conditional(const ModelState& s, const GibbsContext& ctx, std::size_t p) {
  const auto n = static_cast<Eigen::Index>(ctx.times());
  const auto pp = static_cast<Eigen::Index>(p);
  const auto& z = ctx.cov().z[p];
  VectorXd prec = VectorXd::Zero(n);
  VectorXd lin = VectorXd::Zero(n);
  for_each_dyad(ctx.nodes(), ctx.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
    if (!ctx.active(i, j, t)) return;
    const auto tt = static_cast<Eigen::Index>(t);
    const double w = s.w(i, j, t);
    const double zp = z(i, j, t);
    const double rest = linear_predictor(s, ctx.cov(), i, j, t) - zp * s.beta(pp, tt);
    prec(tt) += zp * zp * w;
    lin(tt) += zp * (detail::kappa(s, i, j, t) - w * rest);
  });
  const auto factor = detail::temporal_only(ctx.priors().beta);
  return WhitenedGaussian(factor, factor.whitened_precision(detail::scalar_blocks(prec)), lin);
}

inline void step_beta(ModelState& s, const GibbsContext& ctx, Rng& rng) {
  for (std::size_t p = 0; p < ctx.cov().count(); ++p)
    s.beta.row(static_cast<Eigen::Index>(p)) = beta_conditional(s, ctx, p).draw(rng).transpose();
}

// ---------------------------------------------------------------------------
// Random-effect variant: eps_ij(t) ~ N(0, sigma2), sigma2 ~ InvGamma(2, 1)

inline constexpr double kEpsPriorShape = 2.0;
inline constexpr double kEpsPriorScale = 1.0;

inline void step_random_effects(ModelState& s, const GibbsContext& ctx, Rng& rng) {
  double sum_sq = 0.0;
  for_each_dyad(ctx.nodes(), ctx.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
    double e = 0.0;
    if (ctx.active(i, j, t)) {
      const double w = s.w(i, j, t);
      const double rest = linear_predictor(s, ctx.cov(), i, j, t) - s.eps(i, j, t);
      const double prec = w + 1.0 / s.sigma2_eps;
      e = rng.normal((detail::kappa(s, i, j, t) - w * rest) / prec, 1.0 / std::sqrt(prec));
    } else {
      e = rng.normal(0.0, std::sqrt(s.sigma2_eps));
    }
    s.eps(i, j, t) = e;
    sum_sq += e * e;
  });
  const double cells = static_cast<double>(ctx.nodes() * (ctx.nodes() - 1) * ctx.times());
  s.sigma2_eps = 1.0 / rng.gamma(kEpsPriorShape + 0.5 * cells, kEpsPriorScale + 0.5 * sum_sq);
}

// ---------------------------------------------------------------------------
// Step 4: multiplicative factors, one node at a time

inline KroneckerFactor latent_prior_factor(const ModelState& s, const GibbsContext& ctx) {
  return KroneckerFactor(ctx.priors().role_x, s.tau.cwiseInverse().cwiseSqrt(), ctx.priors().x.lower);
}

/**
 * @brief Full conditional of X^(v) = (sender trajectories, receiver trajectories).
 *
 * Outgoing cells (v, j) load on x_j^r(t), incoming cells (i, v) on x_i^s(t).
 * The data precision is block diagonal over (role, t) with H x H blocks.
 */
inline WhitenedGaussian latent_conditional(const ModelState& s, const GibbsContext& ctx, std::size_t v) {
  const auto hd = static_cast<Eigen::Index>(s.dims());
  const auto n = static_cast<Eigen::Index>(ctx.times());
  const auto factor = latent_prior_factor(s, ctx);
  std::vector<MatrixXd> blocks(static_cast<std::size_t>(2 * n), MatrixXd::Zero(hd, hd));
  VectorXd lin = VectorXd::Zero(factor.size());
  for (std::size_t t = 0; t < ctx.times(); ++t) {
    const auto tt = static_cast<Eigen::Index>(t);
    auto& send = blocks[t];
    auto& recv = blocks[static_cast<std::size_t>(n) + t];
    for (std::size_t u = 0; u < ctx.nodes(); ++u) {
      if (u == v) continue;
      if (ctx.active(v, u, t)) {
        const auto x = s.xr[u].col(tt);
        const double w = s.w(v, u, t);
        const double rest = linear_predictor(s, ctx.cov(), v, u, t) - s.xs[v].col(tt).dot(x);
        send.noalias() += w * x * x.transpose();
        const double r = detail::kappa(s, v, u, t) - w * rest;
        for (Eigen::Index h = 0; h < hd; ++h) lin(factor.index(0, h, tt)) += x(h) * r;
      }
      if (ctx.active(u, v, t)) {
        const auto x = s.xs[u].col(tt);
        const double w = s.w(u, v, t);
        const double rest = linear_predictor(s, ctx.cov(), u, v, t) - x.dot(s.xr[v].col(tt));
        recv.noalias() += w * x * x.transpose();
        const double r = detail::kappa(s, u, v, t) - w * rest;
        for (Eigen::Index h = 0; h < hd; ++h) lin(factor.index(1, h, tt)) += x(h) * r;
      }
    }
  }
  return WhitenedGaussian(factor, factor.whitened_precision(blocks), lin);
}

inline void step_latent_factors(ModelState& s, const GibbsContext& ctx, Rng& rng) {
  const auto hd = static_cast<Eigen::Index>(s.dims());
  const auto n = static_cast<Eigen::Index>(ctx.times());
  for (std::size_t v = 0; v < ctx.nodes(); ++v) {
    const VectorXd x = latent_conditional(s, ctx, v).draw(rng);
    for (Eigen::Index h = 0; h < hd; ++h) {
      s.xs[v].row(h) = x.segment(h * n, n).transpose();
      s.xr[v].row(h) = x.segment((hd + h) * n, n).transpose();
    }
  }
}

// ---------------------------------------------------------------------------
// Step 5: multiplicative gamma shrinkage

/// q_h = sum_i X*_ih^T [[K, rho K], [rho K, K]]^{-1} X*_ih for each dimension h.
inline VectorXd shrinkage_quadratic_forms(const ModelState& s, const GibbsContext& ctx) {
  const auto hd = static_cast<Eigen::Index>(s.dims());
  const auto n = static_cast<Eigen::Index>(ctx.times());
  const KroneckerFactor block(ctx.priors().role_x, VectorXd::Ones(1), ctx.priors().x.lower);
  VectorXd q = VectorXd::Zero(hd);
  VectorXd stacked(2 * n);
  for (std::size_t i = 0; i < ctx.nodes(); ++i)
    for (Eigen::Index h = 0; h < hd; ++h) {
      stacked.head(n) = s.xs[i].row(h).transpose();
      stacked.tail(n) = s.xr[i].row(h).transpose();
      q(h) += block.solve(stacked).squaredNorm();
    }
  return q;
}

/// Gamma shape for nu_l (l is zero-based): a + N V (H* - l).
inline double shrinkage_shape(double a, std::size_t nodes, std::size_t times, std::size_t dims, std::size_t l) {
  return a + static_cast<double>(times * nodes * (dims - l));
}

/// Gamma rate for nu_l: 1 + 1/2 sum_{h >= l} (prod_{m <= h, m != l} nu_m) q_h.
inline double shrinkage_rate(const VectorXd& q, const VectorXd& nu, std::size_t l) {
  double rate = 1.0;
  double prod = 1.0;
  for (Eigen::Index h = 0; h < q.size(); ++h) {
    if (h != static_cast<Eigen::Index>(l)) prod *= nu(h);
    if (h >= static_cast<Eigen::Index>(l)) rate += 0.5 * prod * q(h);
  }
  return rate;
}

inline void recompose_tau(ModelState& s) {
  double prod = 1.0;
  for (Eigen::Index h = 0; h < s.nu.size(); ++h) {
    prod *= s.nu(h);
    s.tau(h) = prod;
  }
}

inline void step_shrinkage(ModelState& s, const GibbsContext& ctx, Rng& rng) {
  const VectorXd q = shrinkage_quadratic_forms(s, ctx);
  for (std::size_t l = 0; l < s.dims(); ++l) {
    const double rate = shrinkage_rate(q, s.nu, l);
    if (!(rate > 0.0) || !std::isfinite(rate)) throw NumericalError("shrinkage rate is not positive");
    s.nu(static_cast<Eigen::Index>(l)) =
        rng.gamma(shrinkage_shape(ctx.config().shrink_a, ctx.nodes(), ctx.times(), s.dims(), l), rate);
  }
  recompose_tau(s);
}

// ---------------------------------------------------------------------------
// Step 6: sociability / popularity, one node at a time

inline WhitenedGaussian additive_conditional(const ModelState& s, const GibbsContext& ctx, std::size_t v) {
  const auto n = static_cast<Eigen::Index>(ctx.times());
  const auto vv = static_cast<Eigen::Index>(v);
  VectorXd prec = VectorXd::Zero(2 * n);
  VectorXd lin = VectorXd::Zero(2 * n);
  for (std::size_t t = 0; t < ctx.times(); ++t) {
    const auto tt = static_cast<Eigen::Index>(t);
    for (std::size_t u = 0; u < ctx.nodes(); ++u) {
      if (u == v) continue;
      if (ctx.active(v, u, t)) {  // outgoing: residual keeps b_u
        const double w = s.w(v, u, t);
        prec(tt) += w;
        lin(tt) += detail::kappa(s, v, u, t) - w * (linear_predictor(s, ctx.cov(), v, u, t) - s.a(vv, tt));
      }
      if (ctx.active(u, v, t)) {  // incoming: residual keeps a_u
        const double w = s.w(u, v, t);
        prec(n + tt) += w;
        lin(n + tt) += detail::kappa(s, u, v, t) - w * (linear_predictor(s, ctx.cov(), u, v, t) - s.b(vv, tt));
      }
    }
  }
  const KroneckerFactor factor(ctx.priors().role_ab, VectorXd::Ones(1), ctx.priors().ab.lower);
  return WhitenedGaussian(factor, factor.whitened_precision(detail::scalar_blocks(prec)), lin);
}

inline void step_additive(ModelState& s, const GibbsContext& ctx, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(ctx.times());
  for (std::size_t v = 0; v < ctx.nodes(); ++v) {
    const VectorXd ab = additive_conditional(s, ctx, v).draw(rng);
    s.a.row(static_cast<Eigen::Index>(v)) = ab.head(n).transpose();
    s.b.row(static_cast<Eigen::Index>(v)) = ab.tail(n).transpose();
  }
}

// ---------------------------------------------------------------------------
// Step 7: missing outcomes

inline void step_impute(ModelState& s, const GibbsContext& ctx, Rng& rng) {
  for_each_dyad(ctx.nodes(), ctx.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
    if (ctx.data().observed(i, j, t)) return;
    s.y(i, j, t) = rng.bernoulli(link_probability(linear_predictor(s, ctx.cov(), i, j, t))) ? 1 : 0;
  });
}

// ---------------------------------------------------------------------------
// Chain driver

/// Draws mu, beta, (a, b) and X from their priors (tau = 1) and sets nu = 1.
inline void draw_from_prior(ModelState& s, const GibbsContext& ctx, Rng& rng) {
  const auto& pr = ctx.priors();
  const auto n = static_cast<Eigen::Index>(ctx.times());
  s.mu = pr.mu.lower * standard_normal(n, rng);
  for (Eigen::Index p = 0; p < s.beta.rows(); ++p) s.beta.row(p) = (pr.beta.lower * standard_normal(n, rng)).transpose();
  if (!has_network_effects(s.variant)) return;
  s.nu.setOnes();
  recompose_tau(s);
  const KroneckerFactor ab(pr.role_ab, VectorXd::Ones(1), pr.ab.lower);
  const auto fx = latent_prior_factor(s, ctx);
  const auto hd = static_cast<Eigen::Index>(s.dims());
  for (std::size_t v = 0; v < ctx.nodes(); ++v) {
    const VectorXd d = ab.apply(standard_normal(ab.size(), rng));
    s.a.row(static_cast<Eigen::Index>(v)) = d.head(n).transpose();
    s.b.row(static_cast<Eigen::Index>(v)) = d.tail(n).transpose();
    const VectorXd x = fx.apply(standard_normal(fx.size(), rng));
    for (Eigen::Index h = 0; h < hd; ++h) {
      s.xs[v].row(h) = x.segment(h * n, n).transpose();
      s.xr[v].row(h) = x.segment((hd + h) * n, n).transpose();
    }
  }
}

/**
 * @brief Initial chain state.
 *
 * Priors are drawn from a dedicated sub-stream of the seed; missing outcomes
 * start as fair coin flips and the weights get one Step-1 pass.
 */
inline ModelState initial_state(const GibbsContext& ctx) {
  const auto& cfg = ctx.config();
  ModelState s = ModelState::zeros(ctx.nodes(), ctx.times(), ctx.cov().count(), cfg.h_star, cfg.variant);
  Rng rng(cfg.seed, 1);
  draw_from_prior(s, ctx, rng);
  if (cfg.variant == Variant::random_effect)
    for_each_dyad(ctx.nodes(), ctx.times(),
                  [&](std::size_t i, std::size_t j, std::size_t t) { s.eps(i, j, t) = rng.normal(); });
  for_each_dyad(ctx.nodes(), ctx.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
    const auto y = ctx.data().value(i, j, t);
    s.y(i, j, t) = y ? static_cast<std::uint8_t>(*y) : (rng.bernoulli(0.5) ? 1 : 0);
  });
  step_pg_weights(s, ctx, rng);
  return s;
}

/**
 * @brief One full sweep, Steps 1 -> 7.
 *
 * The naive and random-effect variants skip Steps 4-6; random_effect adds
 * its eps / sigma2 update after Step 3.
 */
inline void gibbs_sweep(ModelState& s, const GibbsContext& ctx, Rng& rng, long iteration = 0) {
  auto run = [&](const char* name, auto&& step) {
    try {
      step(s, ctx, rng);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("iteration ") + std::to_string(iteration) + ", " + name + ": " + e.what());
    }
  };
  run("step_pg_weights", step_pg_weights);
  run("step_mu", step_mu);
  run("step_beta", step_beta);
  if (s.variant == Variant::random_effect) run("step_random_effects", step_random_effects);
  if (has_network_effects(s.variant)) {
    run("step_latent_factors", step_latent_factors);
    run("step_shrinkage", step_shrinkage);
    run("step_additive", step_additive);
  }
  run("step_impute", step_impute);
}

/// Saved projection of one iteration.
struct Draw {
  long iteration = 0;
  VectorXd mu;
  MatrixXd beta;
  MatrixXd a;
  MatrixXd b;
  std::vector<MatrixXd> xs;
  std::vector<MatrixXd> xr;
  VectorXd tau;
  double sigma2_eps = 0.0;
  Cube<double> pi;

  /// State carrying this draw's parameters (weights, outcomes, eps left at zero).
  ModelState state(Variant variant) const {
    ModelState s = ModelState::zeros(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(mu.size()),
                                     static_cast<std::size_t>(beta.rows()), xs.empty() ? 0 : static_cast<std::size_t>(xs.front().rows()),
                                     variant);
    s.mu = mu;
    s.beta = beta;
    s.a = a;
    s.b = b;
    s.xs = xs;
    s.xr = xr;
    s.tau = tau;
    s.sigma2_eps = sigma2_eps;
    return s;
  }
};

struct Trace {
  HyperConfig config;
  std::vector<std::string> labels;
  TimeGrid grid;
  std::vector<std::pair<std::string, double>> jitter;  // kernel family -> jitter used
  double seconds = 0.0;
  std::vector<Draw> draws;
};

inline Draw snapshot(const ModelState& s, const CovariateSet& cov, long iteration) {
  Draw d;
  d.iteration = iteration;
  d.mu = s.mu;
  d.beta = s.beta;
  d.a = s.a;
  d.b = s.b;
  d.xs = s.xs;
  d.xr = s.xr;
  d.tau = s.tau;
  d.sigma2_eps = s.sigma2_eps;
  d.pi = Cube<double>(s.nodes(), s.times(), 0.0);
  for_each_dyad(s.nodes(), s.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
    d.pi(i, j, t) = link_probability(linear_predictor(s, cov, i, j, t));
  });
  return d;
}

using ProgressFn = std::function<void(long iteration, const ModelState&)>;

/**
 * @brief Runs one chain and returns the thinned post-burn-in trace.
 *
 * Deterministic given config.seed.
 */
inline Trace run_chain(const NetworkSeries& data, const CovariateSet& cov, const HyperConfig& config,
                       const ProgressFn& progress = {}) {
  const auto start = std::chrono::steady_clock::now();
  const GibbsContext ctx(data, cov, config);
  Trace trace;
  trace.config = config;
  trace.labels = data.labels();
  trace.grid = data.grid();
  const auto& pr = ctx.priors();
  trace.jitter = {{"mu", pr.mu.jitter}, {"beta", pr.beta.jitter}, {"ab", pr.ab.jitter}, {"x", pr.x.jitter}};
  trace.draws.reserve(static_cast<std::size_t>(config.saved_draws()));

  ModelState s = initial_state(ctx);
  Rng rng(config.seed, 2);
  for (long it = 1; it <= config.iterations; ++it) {
    gibbs_sweep(s, ctx, rng, it);
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) trace.draws.push_back(snapshot(s, cov, it));
    if (progress) progress(it, s);
  }
  trace.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

}  // namespace dlsn
