#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "dlsn/errors.hpp"
#include "dlsn/rng.hpp"

namespace dlsn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Evaluation grid shared by every Gaussian process in the model.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.empty()) throw ConfigError("time grid must contain at least one point");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1])) throw ConfigError("time grid must be strictly increasing");
  }

  /// 1, 2, ..., n (quarters).
  static TimeGrid integers(std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i + 1);
    return TimeGrid(std::move(t));
  }

  std::size_t size() const { return times_.size(); }
  double operator[](std::size_t i) const { return times_[i]; }
  const std::vector<double>& times() const { return times_; }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::vector<double> times_;
};

struct KernelMatrix {
  MatrixXd values;
  double length_scale = 0.0;
};

/// c(t, t') = exp(-k (t - t')^2) on the grid.
inline KernelMatrix sq_exp_kernel(const TimeGrid& grid, double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("kernel length scale must be positive");
  const auto n = static_cast<Eigen::Index>(grid.size());
  KernelMatrix out{MatrixXd(n, n), k};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d = grid[i] - grid[j];
      out.values(i, j) = out.values(j, i) = std::exp(-k * d * d);
    }
  }
  return out;
}

/// scale * [[K, rho K], [rho K, K]].
inline MatrixXd assemble_block_cov(const KernelMatrix& base, double rho, double scale) {
  if (!(std::abs(rho) < 1.0)) throw ConfigError("block correlation must satisfy |rho| < 1");
  if (!(scale > 0.0)) throw ConfigError("block covariance scale must be positive");
  const auto n = base.values.rows();
  MatrixXd out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = scale * base.values;
  out.bottomRightCorner(n, n) = scale * base.values;
  out.topRightCorner(n, n) = scale * rho * base.values;
  out.bottomLeftCorner(n, n) = scale * rho * base.values;
  return out;
}

struct CholFactor {
  MatrixXd lower;
  double jitter = 0.0;
};

inline constexpr std::array<double, 4> kJitterLadder{0.0, 1e-10, 1e-8, 1e-6};

/**
 * @brief Cholesky factor of a symmetric matrix with a diagonal jitter ladder.
 *
 * Tries each jitter in kJitterLadder and keeps the first that factors.
 * Squared-exponential kernels on many closely spaced points are singular to
 * machine precision, so a positive jitter is the normal case there.
 */
inline CholFactor chol_jitter(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw ConfigError("chol_jitter: matrix must be square");
  const auto n = a.rows();
  for (double jitter : kJitterLadder) {
    Eigen::LLT<MatrixXd> llt(a + jitter * MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      MatrixXd l = llt.matrixL();
      if (l.allFinite() && (l.diagonal().array() > 0.0).all()) return {std::move(l), jitter};
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << "Cholesky failed at maximum jitter " << kJitterLadder.back() << " (n=" << n;
  if (eig.info() == Eigen::Success) {
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    msg << ", min eigenvalue=" << lo << ", max eigenvalue=" << hi;
    if (lo > 0.0) msg << ", condition=" << hi / lo;
  }
  msg << ")";
  throw NumericalError(msg.str());
}

inline VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
  return z;
}

inline VectorXd sample_mvn(const VectorXd& mean, const CholFactor& factor, Rng& rng) {
  if (factor.lower.rows() != mean.size()) throw ConfigError("sample_mvn: dimension mismatch");
  return mean + factor.lower * standard_normal(mean.size(), rng);
}

/// mean + L z, z ~ N(0, I), with L from chol_jitter(cov).
inline VectorXd sample_mvn(const VectorXd& mean, const MatrixXd& cov, Rng& rng) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw ConfigError("sample_mvn: dimension mismatch");
  if (cov.isZero(0.0)) return mean;
  return sample_mvn(mean, chol_jitter(cov), rng);
}

/**
 * @brief Lower-triangular factor with Kronecker structure
 *        L = Lc (x) diag(s) (x) Lt.
 *
 * Lc is the 1x1 or 2x2 factor of the role correlation [[1, rho], [rho, 1]],
 * s holds per-dimension standard deviations (tau_h^{-1/2} for latent factors),
 * Lt is the temporal kernel factor. Vectors are laid out role-major, then
 * dimension, then time: index (r, h, t) -> (r * H + h) * N + t, matching the
 * stacking of a node's sender block followed by its receiver block.
 */
class KroneckerFactor {
 public:
  KroneckerFactor(MatrixXd role, VectorXd scales, const MatrixXd& temporal)
      : role_(std::move(role)), scales_(std::move(scales)), temporal_(&temporal) {}

  /// Factor of [[1, rho], [rho, 1]].
  static MatrixXd role_factor(double rho) {
    MatrixXd l(2, 2);
    l << 1.0, 0.0, rho, std::sqrt(1.0 - rho * rho);
    return l;
  }

  Eigen::Index roles() const { return role_.rows(); }
  Eigen::Index dims() const { return scales_.size(); }
  Eigen::Index times() const { return temporal_->rows(); }
  Eigen::Index size() const { return roles() * dims() * times(); }

  Eigen::Index index(Eigen::Index r, Eigen::Index h, Eigen::Index t) const {
    return (r * dims() + h) * times() + t;
  }

  VectorXd apply(const VectorXd& u) const {
    VectorXd x = VectorXd::Zero(size());
    const auto n = times();
    for (Eigen::Index h = 0; h < dims(); ++h)
      for (Eigen::Index rp = 0; rp < roles(); ++rp) {
        const VectorXd lu = scales_(h) * (*temporal_ * u.segment(index(rp, h, 0), n));
        for (Eigen::Index r = rp; r < roles(); ++r)
          x.segment(index(r, h, 0), n) += role_(r, rp) * lu;
      }
    return x;
  }

  VectorXd apply_transpose(const VectorXd& x) const {
    VectorXd u = VectorXd::Zero(size());
    const auto n = times();
    for (Eigen::Index h = 0; h < dims(); ++h)
      for (Eigen::Index r = 0; r < roles(); ++r) {
        const VectorXd lx = scales_(h) * (temporal_->transpose() * x.segment(index(r, h, 0), n));
        for (Eigen::Index rp = 0; rp <= r; ++rp) u.segment(index(rp, h, 0), n) += role_(r, rp) * lx;
      }
    return u;
  }

  /// L^{-1} x by forward substitution on each factor.
  VectorXd solve(const VectorXd& x) const {
    VectorXd u(size());
    const auto n = times();
    const auto lt = temporal_->triangularView<Eigen::Lower>();
    for (Eigen::Index h = 0; h < dims(); ++h)
      for (Eigen::Index r = 0; r < roles(); ++r) {
        VectorXd rhs = lt.solve(x.segment(index(r, h, 0), n)) / scales_(h);
        for (Eigen::Index rp = 0; rp < r; ++rp) rhs -= role_(r, rp) * u.segment(index(rp, h, 0), n);
        u.segment(index(r, h, 0), n) = rhs / role_(r, r);
      }
    return u;
  }

  MatrixXd dense() const {
    MatrixXd scaled = scales_.asDiagonal();
    return Eigen::kroneckerProduct(Eigen::kroneckerProduct(role_, scaled).eval(), *temporal_);
  }

  /**
   * @brief I + L^T D L for block-diagonal D.
   *
   * D couples the H dimensions of one role at one time point only;
   * blocks[r * N + t] is that H x H block.
   */
  MatrixXd whitened_precision(const std::vector<MatrixXd>& blocks) const {
    const auto n = times();
    const auto hd = dims();
    const auto m = roles();
    MatrixXd out = MatrixXd::Identity(size(), size());
    VectorXd d(n);
    MatrixXd gram(n, n);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index h1 = 0; h1 < hd; ++h1)
        for (Eigen::Index h2 = h1; h2 < hd; ++h2) {
          bool any = false;
          for (Eigen::Index t = 0; t < n; ++t) {
            d(t) = blocks[static_cast<std::size_t>(r * n + t)](h1, h2);
            any = any || d(t) != 0.0;
          }
          if (!any) continue;
          gram.noalias() = temporal_->transpose() * (d.asDiagonal() * *temporal_);
          const double s = scales_(h1) * scales_(h2);
          for (Eigen::Index r1 = 0; r1 <= r; ++r1)
            for (Eigen::Index r2 = 0; r2 <= r; ++r2) {
              const double c = role_(r, r1) * role_(r, r2) * s;
              if (c == 0.0) continue;
              out.block(index(r1, h1, 0), index(r2, h2, 0), n, n) += c * gram;
              if (h1 != h2) out.block(index(r2, h2, 0), index(r1, h1, 0), n, n) += c * gram.transpose();
            }
        }
    return out;
  }

 private:
  MatrixXd role_;
  VectorXd scales_;
  const MatrixXd* temporal_;
};

struct GaussianMoments {
  VectorXd mean;
  MatrixXd cov;
};

/**
 * @brief Conditional N(Sigma b, Sigma), Sigma = (K^{-1} + D)^{-1}, K = L L^T.
 *
 * Works in whitened coordinates u = L^{-1} x where the precision is
 * A = I + L^T D L, so the prior inverse is never formed.
 */
class WhitenedGaussian {
 public:
  WhitenedGaussian(const KroneckerFactor& factor, MatrixXd whitened_precision, const VectorXd& linear)
      : factor_(factor), llt_(whitened_precision), rhs_(factor.apply_transpose(linear)) {
    if (llt_.info() != Eigen::Success)
      throw NumericalError("whitened conditional precision is not positive definite");
  }

  VectorXd draw(Rng& rng) const {
    VectorXd u = llt_.solve(rhs_);
    u += llt_.matrixU().solve(standard_normal(rhs_.size(), rng));
    return factor_.apply(u);
  }

  GaussianMoments moments() const {
    const MatrixXd l = factor_.dense();
    const MatrixXd ainv_lt = llt_.solve(l.transpose());
    return {factor_.apply(llt_.solve(rhs_)), l * ainv_lt};
  }

 private:
  KroneckerFactor factor_;
  Eigen::LLT<MatrixXd> llt_;
  VectorXd rhs_;
};

}  // namespace dlsn
