#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nngp/errors.hpp"
#include "nngp/parallel.hpp"

namespace nngp {

enum class Activation { ReLU, Erf };

inline const char* to_string(Activation a) { return a == Activation::ReLU ? "relu" : "erf"; }

inline Activation activation_from_string(const std::string& name) {
  if (name == "relu" || name == "ReLU") return Activation::ReLU;
  if (name == "erf" || name == "Erf") return Activation::Erf;
  throw validation_error("unknown activation '" + name + "' (expected relu or erf)");
}

/// Hyperparameters of the infinitely wide fully connected network. They fix
/// the covariance function completely.
struct NetworkConfig {
  int depth = 3;
  Activation activation = Activation::ReLU;
  double weight_variance = 1.0;
  double bias_variance = 0.0;

  void validate() const {
    if (depth < 1) throw domain_error("network depth must be at least 1");
    if (!(weight_variance > 0.0)) throw domain_error("weight variance must be positive");
    if (!(bias_variance >= 0.0)) throw domain_error("bias variance must be non-negative");
  }
};

/// Covariances of a pair of inputs at one layer: K(x,x), K(x,x'), K(x',x').
struct CovarianceTriple {
  double xx;
  double xy;
  double yy;
};

/// Layer-0 covariance sigma_b^2 + sigma_w^2 * (x . x') / d_in.
inline double base_kernel(std::span<const double> x, std::span<const double> x_prime,
                          const NetworkConfig& config) {
  if (x.size() != x_prime.size())
    throw dimension_error("base_kernel: inputs have lengths " + std::to_string(x.size()) +
                          " and " + std::to_string(x_prime.size()));
  if (x.empty()) throw domain_error("base_kernel: inputs must be non-empty");
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * x_prime[i];
  return config.bias_variance +
         config.weight_variance * (dot / static_cast<double>(x.size()));
}

namespace detail {

// Correlations may overshoot +-1 by this relative amount from rounding.
inline constexpr double kCorrelationSlack = 1e-9;

inline double clamped_correlation(double k_xx, double k_xxp, double k_xpxp, const char* who) {
  const double norm = std::sqrt(k_xx * k_xpxp);
  const double rho = k_xxp / norm;
  if (!(std::abs(rho) <= 1.0 + kCorrelationSlack))
    throw domain_error(std::string(who) + ": covariance triple violates Cauchy-Schwarz");
  return std::clamp(rho, -1.0, 1.0);
}

}  // namespace detail

/// One ReLU layer of the recursion, using the degree-1 arc-cosine closed form
/// E[relu(z) relu(z')] = sqrt(k_xx k_x'x') (sin t + (pi - t) cos t) / (2 pi).
inline double relu_layer_step(double k_xx, double k_xxp, double k_xpxp,
                              const NetworkConfig& config) {
  if (!(k_xx > 0.0) || !(k_xpxp > 0.0))
    throw domain_error("relu_layer_step: diagonal covariances must be positive");
  const double c = detail::clamped_correlation(k_xx, k_xxp, k_xpxp, "relu_layer_step");
  const double theta = std::acos(c);
  const double sin_theta = std::sqrt((1.0 - c) * (1.0 + c));
  const double j = sin_theta + (std::numbers::pi - theta) * c;
  return config.bias_variance + config.weight_variance / (2.0 * std::numbers::pi) *
                                    std::sqrt(k_xx * k_xpxp) * j;
}

/// One erf layer: E[erf(z) erf(z')] = (2/pi) asin(2 k_xx' / sqrt((1+2k_xx)(1+2k_x'x'))).
inline double erf_layer_step(double k_xx, double k_xxp, double k_xpxp,
                             const NetworkConfig& config) {
  if (!(k_xx >= 0.0) || !(k_xpxp >= 0.0))
    throw domain_error("erf_layer_step: diagonal covariances must be non-negative");
  const double denom = std::sqrt((1.0 + 2.0 * k_xx) * (1.0 + 2.0 * k_xpxp));
  const double ratio = std::clamp(2.0 * k_xxp / denom, -1.0, 1.0);
  return config.bias_variance +
         config.weight_variance * (2.0 / std::numbers::pi) * std::asin(ratio);
}

inline double layer_step(double k_xx, double k_xxp, double k_xpxp, const NetworkConfig& config) {
  return config.activation == Activation::ReLU ? relu_layer_step(k_xx, k_xxp, k_xpxp, config)
                                               : erf_layer_step(k_xx, k_xxp, k_xpxp, config);
}

/// Pushes a layer-0 covariance triple through `depth` nonlinear layers.
inline CovarianceTriple propagate(CovarianceTriple k, const NetworkConfig& config) {
  for (int l = 0; l < config.depth; ++l) {
    k = {layer_step(k.xx, k.xx, k.xx, config), layer_step(k.xx, k.xy, k.yy, config),
         layer_step(k.yy, k.yy, k.yy, config)};
  }
  return k;
}

/// K^L(x, x') for the configured network.
inline double kernel_value(std::span<const double> x, std::span<const double> x_prime,
                           const NetworkConfig& config) {
  config.validate();
  const CovarianceTriple base{base_kernel(x, x, config), base_kernel(x, x_prime, config),
                              base_kernel(x_prime, x_prime, config)};
  return propagate(base, config).xy;
}

/// Kernel evaluated between every pair of feature columns.
struct KernelMatrix {
  Eigen::MatrixXd entries;
  NetworkConfig config;
  Eigen::Index input_dim = 0;

  Eigen::Index size() const { return entries.rows(); }
};

/// Builds the p x p kernel over the columns of `points` (each column is one
/// input of length d_in). Entries are computed for u <= v and mirrored.
inline KernelMatrix build_kernel_matrix(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                        const NetworkConfig& config, unsigned threads = 1) {
  config.validate();
  const Eigen::Index d = points.rows();
  const Eigen::Index p = points.cols();
  if (p < 1) throw dimension_error("build_kernel_matrix: need at least one column");
  if (d < 1) throw domain_error("build_kernel_matrix: columns must be non-empty");

  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(p, p);
  k.selfadjointView<Eigen::Lower>().rankUpdate(points.transpose(),
                                               config.weight_variance / static_cast<double>(d));
  k.array() += config.bias_variance;

  if (config.activation == Activation::ReLU) {
    for (Eigen::Index u = 0; u < p; ++u) {
      if (!(k(u, u) > 0.0))
        throw domain_error("build_kernel_matrix: column " + std::to_string(u) +
                           " has a non-positive kernel diagonal (all-zero column with zero bias "
                           "variance)");
    }
  }

  Eigen::VectorXd diag(p);
  for (int l = 0; l < config.depth; ++l) {
    diag = k.diagonal();
    parallel_for(static_cast<std::size_t>(p), threads, [&](std::size_t col) {
      const auto v = static_cast<Eigen::Index>(col);
      for (Eigen::Index u = v + 1; u < p; ++u)
        k(u, v) = layer_step(diag(u), k(u, v), diag(v), config);
    });
    for (Eigen::Index u = 0; u < p; ++u) k(u, u) = layer_step(diag(u), diag(u), diag(u), config);
  }
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return KernelMatrix{std::move(k), config, d};
}

/// List-of-columns form of build_kernel_matrix.
inline KernelMatrix build_kernel_matrix(const std::vector<std::vector<double>>& feature_columns,
                                        const NetworkConfig& config) {
  if (feature_columns.empty()) throw dimension_error("build_kernel_matrix: no columns");
  const std::size_t d = feature_columns.front().size();
  Eigen::MatrixXd points(static_cast<Eigen::Index>(d),
                         static_cast<Eigen::Index>(feature_columns.size()));
  for (std::size_t j = 0; j < feature_columns.size(); ++j) {
    if (feature_columns[j].size() != d)
      throw dimension_error("build_kernel_matrix: ragged column " + std::to_string(j));
    for (std::size_t i = 0; i < d; ++i)
      points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feature_columns[j][i];
  }
  return build_kernel_matrix(points, config);
}

}  // namespace nngp
