#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "nngp/dataset.hpp"
#include "nngp/errors.hpp"

namespace nngp {

/// Downstream analysis model: response ~ predictors (+ intercept).
struct RegressionSpec {
  IndexList predictor_cols;
  Index response_col = 0;
  bool intercept = true;

  void validate(Index cols) const {
    if (predictor_cols.empty()) throw validation_error("regression needs at least one predictor");
    for (Index j : predictor_cols) {
      if (j < 0 || j >= cols) throw validation_error("predictor column out of range");
      if (j == response_col) throw validation_error("response column listed as a predictor");
    }
    if (response_col < 0 || response_col >= cols) throw validation_error("response column out of range");
  }

  Index coefficient_count() const {
    return static_cast<Index>(predictor_cols.size()) + (intercept ? 1 : 0);
  }
};

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov_beta;
  double residual_variance = 0.0;
  Index n = 0;
};

/// Least squares by column-pivoted Householder QR. `design` excludes the
/// intercept column; it is prepended when `intercept` is set.
inline OlsFit ols_fit(const Eigen::Ref<const Eigen::MatrixXd>& design,
                      const Eigen::Ref<const Eigen::VectorXd>& response, bool intercept = true) {
  const Index n = design.rows();
  if (response.size() != n) throw dimension_error("ols_fit: response length differs from design rows");
  const Index q = design.cols() + (intercept ? 1 : 0);
  if (n <= q)
    throw singular_design_error("ols_fit: need more rows (" + std::to_string(n) +
                                ") than coefficients (" + std::to_string(q) + ")");
  Eigen::MatrixXd x(n, q);
  if (intercept) x.col(0).setOnes();
  x.rightCols(design.cols()) = design;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < q) throw singular_design_error("ols_fit: design matrix is rank deficient");

  OlsFit fit;
  fit.n = n;
  fit.beta = qr.solve(response);
  const Eigen::VectorXd resid = response - x * fit.beta;
  fit.residual_variance = resid.squaredNorm() / static_cast<double>(n - q);

  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd gram_inv_permuted = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  fit.cov_beta = fit.residual_variance * (perm * gram_inv_permuted * perm.transpose());
  return fit;
}

/// Fits `spec` on a completed data matrix.
inline OlsFit fit_regression(const Eigen::Ref<const Eigen::MatrixXd>& data, const RegressionSpec& spec) {
  spec.validate(data.cols());
  const Eigen::MatrixXd design = data(Eigen::all, spec.predictor_cols);
  return ols_fit(design, data.col(spec.response_col), spec.intercept);
}

struct PooledCoefficient {
  double estimate = 0.0;
  double within_variance = 0.0;
  double between_variance = 0.0;
  double total_variance = 0.0;
  double std_error = 0.0;
  double dof = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct PooledEstimate {
  std::vector<PooledCoefficient> coefficients;
  int m = 0;
  double confidence_level = 0.95;
  bool single_fit = false;       // M = 1: no between-imputation variance available
  bool zero_between = false;     // B = 0 for every coefficient
};

/// Two-sided critical value; infinite dof uses the normal quantile.
inline double critical_value(double dof, double confidence_level) {
  const double prob = 0.5 * (1.0 + confidence_level);
  if (!std::isfinite(dof) || dof > 1e10)
    return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), prob);
}

/// Rubin's rules: T = W + (1 + 1/M) B with dof (M-1)(1 + W/((1+1/M)B))^2.
/// With M = 1 the single fit is returned with t(n_obs - q) intervals.
inline PooledEstimate rubin_pool(std::span<const OlsFit> fits, Index n_obs,
                                 double confidence_level = 0.95) {
  if (fits.empty()) throw validation_error("rubin_pool: no estimates");
  if (!(confidence_level > 0.0 && confidence_level < 1.0))
    throw validation_error("rubin_pool: confidence level must lie in (0, 1)");
  const Index q = fits.front().beta.size();
  for (const auto& f : fits)
    if (f.beta.size() != q || f.cov_beta.rows() != q || f.cov_beta.cols() != q)
      throw dimension_error("rubin_pool: imputations disagree on the coefficient count");

  const auto m = static_cast<double>(fits.size());
  PooledEstimate out;
  out.m = static_cast<int>(fits.size());
  out.confidence_level = confidence_level;
  out.single_fit = fits.size() == 1;
  out.zero_between = true;
  for (Index j = 0; j < q; ++j) {
    PooledCoefficient c;
    // Deviations from the first fit keep identical estimates exact (B = 0).
    const double anchor = fits.front().beta(j);
    double shift = 0.0;
    for (const auto& f : fits) {
      shift += f.beta(j) - anchor;
      c.within_variance += f.cov_beta(j, j);
    }
    shift /= m;
    c.estimate = anchor + shift;
    c.within_variance /= m;
    if (out.single_fit) {
      c.total_variance = c.within_variance;
      const auto resid_dof = static_cast<double>(n_obs - q);
      c.dof = resid_dof > 0.0 ? resid_dof : std::numeric_limits<double>::infinity();
    } else {
      double ss = 0.0;
      for (const auto& f : fits) {
        const double d = (f.beta(j) - anchor) - shift;
        ss += d * d;
      }
      c.between_variance = ss / (m - 1.0);
      const double inflated = (1.0 + 1.0 / m) * c.between_variance;
      c.total_variance = c.within_variance + inflated;
      if (c.between_variance > 0.0) {
        const double r = 1.0 + c.within_variance / inflated;
        c.dof = (m - 1.0) * r * r;
        out.zero_between = false;
      } else {
        c.dof = std::numeric_limits<double>::infinity();
      }
    }
    c.std_error = std::sqrt(c.total_variance);
    const double half = critical_value(c.dof, confidence_level) * c.std_error;
    c.ci_low = c.estimate - half;
    c.ci_high = c.estimate + half;
    out.coefficients.push_back(c);
  }
  if (out.single_fit) out.zero_between = true;
  return out;
}

/// Per-replicate summary feeding evaluate_run.
struct ReplicateOutcome {
  double squared_error_sum = 0.0;
  long long imputed_cells = 0;  // continuous missing cells x imputations
  long long binary_correct = 0;
  long long binary_cells = 0;
  double variance_sum = 0.0;    // across-imputation variance summed over missing cells
  long long variance_cells = 0;
  bool has_estimate = false;
  PooledCoefficient coefficient;
  double seconds_per_imputation = 0.0;
};

/// Compares decoded imputations to the truth on the missing cells.
/// `binary_cols` lists columns scored by accuracy instead of squared error.
inline void score_imputations(ReplicateOutcome& out, const Eigen::MatrixXd& truth,
                              const MaskMatrix& mask, std::span<const Eigen::MatrixXd> imputations,
                              const IndexList& binary_cols = {}) {
  if (mask.rows() != truth.rows() || mask.cols() != truth.cols())
    throw dimension_error("score_imputations: mask and truth differ in shape");
  std::vector<bool> is_binary(static_cast<std::size_t>(truth.cols()), false);
  for (Index j : binary_cols) is_binary[static_cast<std::size_t>(j)] = true;
  for (const auto& imp : imputations)
    if (imp.rows() != truth.rows() || imp.cols() != truth.cols())
      throw dimension_error("score_imputations: imputation and truth differ in shape");
  const auto m = static_cast<double>(imputations.size());
  for (Index j = 0; j < truth.cols(); ++j) {
    for (Index i = 0; i < truth.rows(); ++i) {
      if (mask(i, j)) continue;
      if (is_binary[static_cast<std::size_t>(j)]) {
        for (const auto& imp : imputations) {
          out.binary_correct += imp(i, j) == truth(i, j) ? 1 : 0;
          ++out.binary_cells;
        }
        continue;
      }
      double sum = 0.0, sum_sq = 0.0;
      for (const auto& imp : imputations) {
        const double e = imp(i, j) - truth(i, j);
        out.squared_error_sum += e * e;
        ++out.imputed_cells;
        sum += imp(i, j);
        sum_sq += imp(i, j) * imp(i, j);
      }
      if (imputations.size() > 1) {
        out.variance_sum += std::max(sum_sq - sum * sum / m, 0.0) / (m - 1.0);
        ++out.variance_cells;
      }
    }
  }
}

struct MetricsReport {
  std::optional<double> imp_mse;
  double bias = 0.0;
  double coverage_rate = 0.0;
  double mean_se = 0.0;
  double sd_across_mc = 0.0;
  std::optional<double> imp_accuracy;
  double wall_seconds_per_imputation = 0.0;
  std::optional<double> mean_imputation_variance;
  int replicates = 0;
};

/// Aggregates Monte-Carlo replicates into the reported metrics for one
/// coefficient whose true value is `true_beta`.
inline MetricsReport evaluate_run(std::span<const ReplicateOutcome> replicates, double true_beta) {
  MetricsReport r;
  r.replicates = static_cast<int>(replicates.size());
  if (replicates.empty()) return r;
  double sq = 0.0, acc = 0.0, var = 0.0;
  long long cells = 0, bin = 0, var_cells = 0;
  double sum_est = 0.0, sum_se = 0.0, seconds = 0.0;
  int covered = 0, fitted = 0;
  for (const auto& rep : replicates) {
    sq += rep.squared_error_sum;
    cells += rep.imputed_cells;
    acc += static_cast<double>(rep.binary_correct);
    bin += rep.binary_cells;
    var += rep.variance_sum;
    var_cells += rep.variance_cells;
    seconds += rep.seconds_per_imputation;
    if (!rep.has_estimate) continue;
    ++fitted;
    sum_est += rep.coefficient.estimate;
    sum_se += rep.coefficient.std_error;
    if (rep.coefficient.ci_low <= true_beta && true_beta <= rep.coefficient.ci_high) ++covered;
  }
  if (cells > 0) r.imp_mse = sq / static_cast<double>(cells);
  if (bin > 0) r.imp_accuracy = acc / static_cast<double>(bin);
  if (var_cells > 0) r.mean_imputation_variance = var / static_cast<double>(var_cells);
  r.wall_seconds_per_imputation = seconds / static_cast<double>(replicates.size());
  if (fitted > 0) {
    const double mean_est = sum_est / fitted;
    r.bias = mean_est - true_beta;
    r.coverage_rate = static_cast<double>(covered) / fitted;
    r.mean_se = sum_se / fitted;
    if (fitted > 1) {
      double ss = 0.0;
      for (const auto& rep : replicates)
        if (rep.has_estimate) ss += (rep.coefficient.estimate - mean_est) * (rep.coefficient.estimate - mean_est);
      r.sd_across_mc = std::sqrt(ss / (fitted - 1));
    }
  }
  return r;
}

}  // namespace nngp
