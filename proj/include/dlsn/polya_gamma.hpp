#pragma once

#include <cmath>
#include <numbers>

#include "dlsn/errors.hpp"
#include "dlsn/rng.hpp"

namespace dlsn {

/// Counters for the PG(1, z) accept/reject loop.
struct PgStats {
  long proposals = 0;
  long accepted = 0;
};

namespace pg_detail {

inline constexpr double kTrunc = 0.64;  // switch point between the two proposal pieces
inline constexpr double kPi = std::numbers::pi;

// Piecewise coefficient a_n(x) of the alternating series for J*(1, 0).
inline double series_coef(double x, int n) {
  const double k = n + 0.5;
  if (x > kTrunc) return kPi * k * std::exp(-k * k * kPi * kPi * x / 2.0);
  return kPi * k * std::pow(2.0 / (kPi * x), 1.5) * std::exp(-2.0 * k * k / x);
}

inline double log_norm_cdf(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic tail, accurate far below the range where erfc underflows.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// Mass of the tilted J*(1, z) density below kTrunc, scaled by exp(-z):
// 2 exp(-z) P(IG(1/z, 1) < t), evaluated without overflow.
inline double left_mass(double z) {
  const double rt = 1.0 / std::sqrt(kTrunc);
  if (z == 0.0) return 2.0 * std::erfc(rt / std::numbers::sqrt2);  // Levy limit
  const double b = rt * (kTrunc * z - 1.0);
  const double a = -rt * (kTrunc * z + 1.0);
  return 2.0 * (std::exp(-z + log_norm_cdf(b)) + std::exp(z + log_norm_cdf(a)));
}

// Inverse Gaussian IG(1/z, 1) truncated to (0, kTrunc).
inline double truncated_inv_gauss(double z, Rng& rng) {
  const double t = kTrunc;
  double x = t + 1.0;
  if (z == 0.0 || 1.0 / z > t) {
    double alpha = 0.0;
    double u = 1.0;
    while (u > alpha) {
      double e1 = 0.0;
      double e2 = 0.0;
      do {
        e1 = rng.exponential();
        e2 = rng.exponential();
      } while (e1 * e1 > 2.0 * e2 / t);
      x = t / ((1.0 + t * e1) * (1.0 + t * e1));
      alpha = std::exp(-0.5 * z * z * x);
      u = rng.uniform();
    }
    return x;
  }
  const double mu = 1.0 / z;
  while (x > t) {
    const double n = rng.normal();
    const double y = n * n;
    x = mu + 0.5 * mu * mu * y - 0.5 * mu * std::sqrt(4.0 * mu * y + (mu * y) * (mu * y));
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
  }
  return x;
}

}  // namespace pg_detail

/**
 * @brief Exact draw from PG(1, z).
 *
 * Alternating-series accept/reject on J*(1, z/2): a truncated inverse
 * Gaussian proposal below 0.64 and a truncated exponential above it, with the
 * series evaluated only until its partial sums bracket the uniform. The draw
 * depends on |z| only, so z and -z give identical values under one seed.
 */
inline double sample_pg1(double z, Rng& rng, PgStats* stats = nullptr) {
  using namespace pg_detail;
  if (!std::isfinite(z)) throw NumericalError("sample_pg1: non-finite tilting parameter");
  const double c = 0.5 * std::abs(z);
  const double k = kPi * kPi / 8.0 + 0.5 * c * c;
  const double p = kPi / (2.0 * k) * std::exp(-k * kTrunc);
  const double q = left_mass(c);
  const double right_prob = p / (p + q);

  for (;;) {
    if (stats) ++stats->proposals;
    const double x = rng.uniform() < right_prob ? kTrunc + rng.exponential() / k
                                                : truncated_inv_gauss(c, rng);
    double s = series_coef(x, 0);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coef(x, n);
        if (y <= s) {
          if (stats) ++stats->accepted;
          return 0.25 * x;
        }
      } else {
        s += series_coef(x, n);
        if (y > s) break;
      }
    }
  }
}

/// E[PG(1, z)] = tanh(z/2) / (2z); series 1/4 - z^2/48 near zero.
inline double pg1_mean(double z) {
  if (std::abs(z) < 1e-4) return 0.25 - z * z / 48.0;
  return std::tanh(0.5 * z) / (2.0 * z);
}

}  // namespace dlsn
