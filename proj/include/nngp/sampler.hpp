#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "nngp/dataset.hpp"
#include "nngp/errors.hpp"
#include "nngp/kernel.hpp"
#include "nngp/rng.hpp"

namespace nngp {

/// Jitter schedule for factoring sigma11. Steps are multiples of the mean
/// diagonal of sigma11, tried in order after an unjittered attempt.
struct JitterPolicy {
  std::vector<double> relative_steps{1e-10, 1e-8, 1e-6, 1e-4};
  // A factorization whose smallest squared pivot falls below this fraction
  // of the largest diagonal entry is treated as failed.
  double min_pivot_ratio = 1e-12;
};

/// Block decomposition of the kernel into observed (1) and missing (2)
/// columns. sigma21 is sigma12 transposed and is not stored.
struct PosteriorBlocks {
  Eigen::MatrixXd sigma11;
  Eigen::MatrixXd sigma12;
  Eigen::MatrixXd sigma22;
  Eigen::MatrixXd chol11;  // lower factor of sigma11 + (noise + jitter_used) I
  double jitter_used = 0.0;
  double observation_noise = 0.0;
};

namespace detail {

struct FactorAttempt {
  bool ok = false;
  Eigen::MatrixXd lower;
  double condition_estimate = std::numeric_limits<double>::infinity();
};

inline FactorAttempt try_cholesky(const Eigen::MatrixXd& a, double min_pivot_ratio) {
  FactorAttempt out;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return out;
  out.lower = llt.matrixL();
  const Eigen::VectorXd pivots_sq = out.lower.diagonal().array().square();
  const double max_diag = a.diagonal().maxCoeff();
  const double min_pivot_sq = pivots_sq.minCoeff();
  out.condition_estimate = min_pivot_sq > 0.0 ? pivots_sq.maxCoeff() / min_pivot_sq
                                              : std::numeric_limits<double>::infinity();
  out.ok = std::isfinite(min_pivot_sq) && min_pivot_sq >= min_pivot_ratio * max_diag;
  return out;
}

}  // namespace detail

/// Extracts the observed/missing blocks of `kernel` and factors sigma11,
/// escalating jitter until the factorization is acceptable.
inline PosteriorBlocks partition_sigma(const Eigen::Ref<const Eigen::MatrixXd>& kernel,
                                       const IndexList& obs_cols, const IndexList& mis_cols,
                                       const JitterPolicy& policy = {},
                                       double observation_noise = 0.0) {
  const Index p = kernel.rows();
  if (kernel.cols() != p) throw dimension_error("partition_sigma: kernel is not square");
  if (obs_cols.empty()) throw validation_error("partition_sigma: no observed columns");
  if (mis_cols.empty()) throw validation_error("partition_sigma: no missing columns");
  if (!(observation_noise >= 0.0)) throw domain_error("partition_sigma: negative observation noise");
  std::vector<char> used(static_cast<std::size_t>(p), 0);
  for (const IndexList* set : {&obs_cols, &mis_cols})
    for (Index j : *set) {
      if (j < 0 || j >= p) throw dimension_error("partition_sigma: column index out of range");
      if (used[static_cast<std::size_t>(j)]++)
        throw validation_error("partition_sigma: column " + std::to_string(j) + " listed twice");
    }

  PosteriorBlocks b;
  b.sigma11 = kernel(obs_cols, obs_cols);
  b.sigma12 = kernel(obs_cols, mis_cols);
  b.sigma22 = kernel(mis_cols, mis_cols);
  b.observation_noise = observation_noise;

  Eigen::MatrixXd a = b.sigma11;
  a.diagonal().array() += observation_noise;
  const double mean_diag = b.sigma11.diagonal().mean();

  auto attempt = detail::try_cholesky(a, policy.min_pivot_ratio);
  if (attempt.ok) {
    b.chol11 = std::move(attempt.lower);
    return b;
  }
  for (double step : policy.relative_steps) {
    const double jitter = step * mean_diag;
    Eigen::MatrixXd jittered = a;
    jittered.diagonal().array() += jitter;
    attempt = detail::try_cholesky(jittered, policy.min_pivot_ratio);
    if (attempt.ok) {
      b.chol11 = std::move(attempt.lower);
      b.jitter_used = jitter;
      return b;
    }
  }
  std::ostringstream msg;
  msg << "sigma11 (" << obs_cols.size() << " observed columns) could not be factored at jitter "
      << (policy.relative_steps.empty() ? 0.0 : policy.relative_steps.back() * mean_diag)
      << "; condition estimate " << attempt.condition_estimate;
  throw singular_kernel_error(msg.str(), attempt.condition_estimate);
}

inline PosteriorBlocks partition_sigma(const KernelMatrix& kernel, const IndexList& obs_cols,
                                       const IndexList& mis_cols, const JitterPolicy& policy = {},
                                       double observation_noise = 0.0) {
  return partition_sigma(kernel.entries, obs_cols, mis_cols, policy, observation_noise);
}

/// Conditional law of the missing block given the observed one:
/// mean = mean_map * x_obs, covariance `cov` (shared by every row).
struct ConditionalGaussian {
  Eigen::MatrixXd mean_map;  // |mis| x |obs|, equals sigma21 sigma11^-1
  Eigen::MatrixXd cov;
  int clamped_variances = 0;
  double prior_scale = 0.0;  // largest prior variance among the missing columns
};

inline ConditionalGaussian conditional_gaussian(const PosteriorBlocks& blocks) {
  const auto lower = blocks.chol11.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd v = lower.solve(blocks.sigma12);               // L^-1 sigma12
  const Eigen::MatrixXd w = lower.transpose().solve(v);                // sigma11^-1 sigma12
  ConditionalGaussian out;
  out.mean_map = w.transpose();
  out.cov = blocks.sigma22;
  if (out.cov.size() > 0) out.prior_scale = blocks.sigma22.diagonal().cwiseAbs().maxCoeff();
  out.cov.noalias() -= v.transpose() * v;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  for (Index j = 0; j < out.cov.rows(); ++j) {
    if (out.cov(j, j) < 0.0) {
      out.cov(j, j) = 0.0;
      ++out.clamped_variances;
    }
  }
  return out;
}

struct PosteriorParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int clamped_variances = 0;
};

/// Posterior mean sigma21 sigma11^-1 x_obs and covariance
/// sigma22 - sigma21 sigma11^-1 sigma12 for one row.
inline PosteriorParams posterior_params(const PosteriorBlocks& blocks,
                                        const Eigen::Ref<const Eigen::VectorXd>& x_obs) {
  if (x_obs.size() != blocks.sigma11.rows())
    throw dimension_error("posterior_params: expected " + std::to_string(blocks.sigma11.rows()) +
                          " observed values, got " + std::to_string(x_obs.size()));
  ConditionalGaussian cg = conditional_gaussian(blocks);
  return {cg.mean_map * x_obs, std::move(cg.cov), cg.clamped_variances};
}

/// Draws from N(mean, cov) through a pivoted LDL^T factor of cov, so singular
/// but positive semidefinite covariances (including zero) need no jitter.
/// Negative pivots down to -tolerance * scale are clamped to zero, where scale
/// is the larger of cov's biggest variance and `reference_scale` (pass the
/// prior variance when cov is a conditional covariance, whose round-off
/// error is proportional to the prior rather than to cov itself).
class MvnSampler {
 public:
  explicit MvnSampler(const Eigen::Ref<const Eigen::MatrixXd>& cov, double tolerance = 1e-4,
                      double reference_scale = 0.0) {
    const Index d = cov.rows();
    if (cov.cols() != d) throw dimension_error("sample_mvn: covariance is not square");
    factor_ = Eigen::MatrixXd::Zero(d, d);
    if (d == 0) return;
    const double scale = std::max(cov.diagonal().cwiseAbs().maxCoeff(), reference_scale);
    if (scale == 0.0) return;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    if (ldlt.info() != Eigen::Success) throw sampling_error("sample_mvn: LDLT factorization failed");
    Eigen::VectorXd dvec = ldlt.vectorD();
    for (Index j = 0; j < d; ++j) {
      if (dvec(j) < -tolerance * scale)
      {
        char buf[96];
        std::snprintf(buf, sizeof buf, "sample_mvn: covariance is indefinite (pivot %.3e, scale %.3e)", dvec(j),
                      scale);
        throw sampling_error(buf);
      }
      dvec(j) = std::sqrt(std::max(dvec(j), 0.0));
    }
    Eigen::MatrixXd l = ldlt.matrixL();
    l = l * dvec.asDiagonal();
    factor_ = ldlt.transpositionsP().transpose() * l;
  }

  Index dim() const { return factor_.rows(); }
  const Eigen::MatrixXd& factor() const { return factor_; }

  Eigen::VectorXd draw(const Eigen::Ref<const Eigen::VectorXd>& mean, RngStream& rng) const {
    if (mean.size() != dim()) throw dimension_error("sample_mvn: mean and covariance differ in size");
    Eigen::VectorXd z(dim());
    for (Index j = 0; j < dim(); ++j) z(j) = rng.normal();
    return mean + factor_ * z;
  }

 private:
  Eigen::MatrixXd factor_;
};

inline Eigen::VectorXd sample_mvn(const Eigen::Ref<const Eigen::VectorXd>& mean,
                                  const Eigen::Ref<const Eigen::MatrixXd>& cov, RngStream& rng) {
  return MvnSampler(cov).draw(mean, rng);
}

}  // namespace nngp
