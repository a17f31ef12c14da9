#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dlsn/errors.hpp"
#include "dlsn/kernels.hpp"
#include "dlsn/tensor.hpp"

namespace dlsn {

/**
 * @brief Binary directed network observed on a time grid.
 *
 * Diagonal cells are never observed. Unobserved cells keep no value: reads
 * go through value(), which returns nullopt for them.
 */
class NetworkSeries {
 public:
  NetworkSeries() = default;
  NetworkSeries(std::vector<std::string> labels, TimeGrid grid)
      : labels_(std::move(labels)),
        grid_(std::move(grid)),
        y_(labels_.size(), grid_.size(), 0),
        observed_(labels_.size(), grid_.size(), 0) {}

  std::size_t nodes() const { return labels_.size(); }
  std::size_t times() const { return grid_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const TimeGrid& grid() const { return grid_; }

  bool observed(std::size_t i, std::size_t j, std::size_t t) const { return observed_(i, j, t) != 0; }

  std::optional<int> value(std::size_t i, std::size_t j, std::size_t t) const {
    if (!observed(i, j, t)) return std::nullopt;
    return y_(i, j, t);
  }

  void set(std::size_t i, std::size_t j, std::size_t t, int v) {
    if (i == j) throw DomainError("network diagonal is undefined");
    if (v != 0 && v != 1) throw DataError("network cells must be 0 or 1");
    y_(i, j, t) = static_cast<std::uint8_t>(v);
    observed_(i, j, t) = 1;
  }

  void mask(std::size_t i, std::size_t j, std::size_t t) {
    y_(i, j, t) = 0;
    observed_(i, j, t) = 0;
  }

  std::size_t observed_count() const {
    std::size_t n = 0;
    for (auto o : observed_.raw()) n += o;
    return n;
  }

  // Raw access for serialization; unobserved cells hold 0.
  const Cube<std::uint8_t>& y_raw() const { return y_; }
  const Cube<std::uint8_t>& observed_raw() const { return observed_; }

  bool operator==(const NetworkSeries&) const = default;

 private:
  std::vector<std::string> labels_;
  TimeGrid grid_;
  Cube<std::uint8_t> y_;
  Cube<std::uint8_t> observed_;
};

/// Dyadic covariates Z_{ij,t} in R^P; one cube per covariate.
struct CovariateSet {
  std::vector<Cube<double>> z;
  std::vector<std::string> labels;

  std::size_t count() const { return z.size(); }

  static CovariateSet none() { return {}; }

  double dot(const MatrixXd& beta, std::size_t i, std::size_t j, std::size_t t) const {
    double s = 0.0;
    for (std::size_t p = 0; p < z.size(); ++p) s += z[p](i, j, t) * beta(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(t));
    return s;
  }

  void validate(std::size_t nodes, std::size_t times) const {
    if (labels.size() != z.size()) throw DataError("covariate labels do not match covariate count");
    for (const auto& c : z) {
      if (c.nodes() != nodes || c.times() != times) throw DataError("covariate shape does not match network");
      for (double v : c.raw())
        if (!std::isfinite(v)) throw DataError("covariates must be finite");
    }
  }

  bool operator==(const CovariateSet&) const = default;
};

enum class Variant { dlsn, naive, random_effect };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::dlsn: return "dlsn";
    case Variant::naive: return "naive";
    case Variant::random_effect: return "random_effect";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "dlsn") return Variant::dlsn;
  if (s == "naive") return Variant::naive;
  if (s == "random_effect") return Variant::random_effect;
  throw ConfigError("unknown model variant '" + s + "'");
}

inline bool has_network_effects(Variant v) { return v == Variant::dlsn; }

/**
 * @brief Every latent quantity at one sampler iteration.
 *
 * xs[i], xr[i] are H x N (column t is x_i(t)). For the naive and
 * random-effect variants H = 0 and a, b stay zero; eps stays zero unless the
 * variant is random_effect.
 */
struct ModelState {
  VectorXd mu;             // N
  MatrixXd beta;           // P x N
  std::vector<MatrixXd> xs;
  std::vector<MatrixXd> xr;
  MatrixXd a;              // V x N
  MatrixXd b;              // V x N
  VectorXd nu;             // H
  VectorXd tau;            // H, cumulative products of nu
  Cube<double> w;          // Polya-Gamma weights, off-diagonal
  Cube<std::uint8_t> y;    // working outcomes: observed values plus imputations
  Cube<double> eps;
  double sigma2_eps = 0.0;
  Variant variant = Variant::dlsn;

  static ModelState zeros(std::size_t nodes, std::size_t times, std::size_t covariates,
                          std::size_t dims, Variant variant) {
    ModelState s;
    const auto v = static_cast<Eigen::Index>(nodes);
    const auto n = static_cast<Eigen::Index>(times);
    const auto h = has_network_effects(variant) ? static_cast<Eigen::Index>(dims) : 0;
    s.mu = VectorXd::Zero(n);
    s.beta = MatrixXd::Zero(static_cast<Eigen::Index>(covariates), n);
    s.xs.assign(nodes, MatrixXd::Zero(h, n));
    s.xr.assign(nodes, MatrixXd::Zero(h, n));
    s.a = MatrixXd::Zero(v, n);
    s.b = MatrixXd::Zero(v, n);
    s.nu = VectorXd::Ones(h);
    s.tau = VectorXd::Ones(h);
    s.w = Cube<double>(nodes, times, 0.0);
    s.y = Cube<std::uint8_t>(nodes, times, 0);
    s.eps = Cube<double>(nodes, times, 0.0);
    s.sigma2_eps = variant == Variant::random_effect ? 1.0 : 0.0;
    s.variant = variant;
    return s;
  }

  std::size_t nodes() const { return static_cast<std::size_t>(a.rows()); }
  std::size_t times() const { return static_cast<std::size_t>(mu.size()); }
  std::size_t dims() const { return xs.empty() ? 0 : static_cast<std::size_t>(xs.front().rows()); }
};

/// x_i^s(t)^T x_j^r(t).
inline double multiplicative_term(const ModelState& s, std::size_t i, std::size_t j, std::size_t t) {
  if (s.dims() == 0) return 0.0;
  const auto tt = static_cast<Eigen::Index>(t);
  return s.xs[i].col(tt).dot(s.xr[j].col(tt));
}

/// S_ij(t) = mu(t) + Z_ij,t^T beta(t) + x_i^s(t)^T x_j^r(t) + a_i(t) + b_j(t) (+ eps_ij(t)).
inline double linear_predictor(const ModelState& s, const CovariateSet& cov, std::size_t i,
                               std::size_t j, std::size_t t) {
  if (i == j) throw DomainError("linear predictor is undefined on the diagonal");
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  const auto tt = static_cast<Eigen::Index>(t);
  double v = s.mu(tt) + cov.dot(s.beta, i, j, t);
  if (has_network_effects(s.variant)) v += multiplicative_term(s, i, j, t) + s.a(ii, tt) + s.b(jj, tt);
  if (s.variant == Variant::random_effect) v += s.eps(i, j, t);
  return v;
}

/// Linear predictor on every off-diagonal cell (diagonal left at 0).
inline Cube<double> predictor_cube(const ModelState& s, const CovariateSet& cov) {
  Cube<double> out(s.nodes(), s.times(), 0.0);
  for_each_dyad(s.nodes(), s.times(),
                [&](std::size_t i, std::size_t j, std::size_t t) { out(i, j, t) = linear_predictor(s, cov, i, j, t); });
  return out;
}

/// Logistic link, evaluated without exponentiating a positive argument.
inline double link_probability(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Bernoulli log-likelihood over observed off-diagonal cells.
inline double log_likelihood(const ModelState& s, const NetworkSeries& data, const CovariateSet& cov) {
  if (data.nodes() != s.nodes() || data.times() != s.times())
    throw ConfigError("log_likelihood: state and data shapes differ");
  double ll = 0.0;
  for_each_dyad(data.nodes(), data.times(), [&](std::size_t i, std::size_t j, std::size_t t) {
    const auto y = data.value(i, j, t);
    if (!y) return;
    const double v = linear_predictor(s, cov, i, j, t);
    // log pi = -log(1 + e^{-S}), log(1 - pi) = -log(1 + e^{S})
    ll -= *y ? log1p_exp(-v) : log1p_exp(v);
  });
  return ll;
}

struct SvdSplit {
  MatrixXd xs;
  MatrixXd xr;
};

/// S = U D V^T -> (U D^{1/2}, V D^{1/2}), so xs * xr^T reproduces S.
inline SvdSplit svd_split(const MatrixXd& s) {
  if (!s.allFinite()) throw NumericalError("svd_split: non-finite input");
  Eigen::JacobiSVD<MatrixXd> svd(s, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericalError("svd_split: SVD did not converge");
  // Singular values at roundoff level are exact zeros; their square roots
  // would otherwise leak ~1e-8 noise into the trailing factor columns.
  VectorXd sv = svd.singularValues();
  const double cutoff = static_cast<double>(s.rows()) * std::numeric_limits<double>::epsilon() * (sv.size() ? sv(0) : 0.0);
  for (auto& x : sv)
    if (x <= cutoff) x = 0.0;
  const VectorXd root = sv.cwiseSqrt();
  return {svd.matrixU() * root.asDiagonal(), svd.matrixV() * root.asDiagonal()};
}

}  // namespace dlsn
