#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "nngp/kernel.hpp"
#include "nngp/rng.hpp"

namespace nngp {

struct OracleEstimate {
  double estimate;
  double std_error;
};

/// Monte-Carlo estimate of K^L(x, x') by direct sampling of the layer
/// expectation E[phi(z) phi(z')]. Each layer draws `samples` bivariate normal
/// pairs with the previous layer's estimated 2x2 covariance. The reported
/// standard error is the sum of the per-layer standard errors of the cross
/// term, scaled by sigma_w^2.
///
/// Shares nothing with the closed-form layer steps apart from the base case.
inline OracleEstimate mc_oracle_kernel(std::span<const double> x, std::span<const double> x_prime,
                                       const NetworkConfig& config, std::uint64_t samples,
                                       std::uint64_t seed) {
  config.validate();
  if (samples < 2) throw domain_error("mc_oracle_kernel: need at least two samples");
  double k_xx = base_kernel(x, x, config);
  double k_xy = base_kernel(x, x_prime, config);
  double k_yy = base_kernel(x_prime, x_prime, config);

  auto phi = [&](double z) {
    return config.activation == Activation::ReLU ? (z > 0.0 ? z : 0.0) : std::erf(z);
  };

  double total_se = 0.0;
  for (int layer = 0; layer < config.depth; ++layer) {
    RngStream rng(seed, StreamKey{StreamPurpose::Oracle, 0, 0, static_cast<std::uint64_t>(layer), 0});
    // z = a * g1, z' = b * g1 + c * g2 reproduces the 2x2 covariance.
    const double a = std::sqrt(std::max(k_xx, 0.0));
    const double b = a > 0.0 ? k_xy / a : 0.0;
    const double c = std::sqrt(std::max(k_yy - b * b, 0.0));

    double sum_xx = 0.0, sum_yy = 0.0, sum_xy = 0.0, sum_xy_sq = 0.0;
    for (std::uint64_t s = 0; s < samples; ++s) {
      const double g1 = rng.normal();
      const double g2 = rng.normal();
      const double fz = phi(a * g1);
      const double fzp = phi(b * g1 + c * g2);
      sum_xx += fz * fz;
      sum_yy += fzp * fzp;
      sum_xy += fz * fzp;
      sum_xy_sq += (fz * fzp) * (fz * fzp);
    }
    const double n = static_cast<double>(samples);
    const double mean_xy = sum_xy / n;
    const double var_xy = std::max(sum_xy_sq / n - mean_xy * mean_xy, 0.0) * n / (n - 1.0);
    total_se += config.weight_variance * std::sqrt(var_xy / n);

    k_xx = config.bias_variance + config.weight_variance * sum_xx / n;
    k_yy = config.bias_variance + config.weight_variance * sum_yy / n;
    k_xy = config.bias_variance + config.weight_variance * mean_xy;
  }
  return {k_xy, total_se};
}

}  // namespace nngp
