#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nngp/dataset.hpp"
#include "nngp/imputers.hpp"
#include "nngp/inference.hpp"
#include "nngp/parallel.hpp"
#include "nngp/synthetic.hpp"

namespace nngp {

enum class BenchMethod { MiNngp1, MiNngp1Bootstrap, MiNngp2, MiNngp2Bootstrap, ColumnMean, CompleteCase, CompleteData };

inline const char* to_string(BenchMethod m) {
  switch (m) {
    case BenchMethod::MiNngp1: return "mi-nngp1";
    case BenchMethod::MiNngp1Bootstrap: return "mi-nngp1-bs";
    case BenchMethod::MiNngp2: return "mi-nngp2";
    case BenchMethod::MiNngp2Bootstrap: return "mi-nngp2-bs";
    case BenchMethod::ColumnMean: return "colmean";
    case BenchMethod::CompleteCase: return "complete-case";
    case BenchMethod::CompleteData: return "complete-data";
  }
  return "?";
}

inline const char* style_of(BenchMethod m) {
  switch (m) {
    case BenchMethod::ColumnMean: return "SI";
    case BenchMethod::CompleteCase:
    case BenchMethod::CompleteData: return "-";
    default: return "MI";
  }
}

inline std::vector<BenchMethod> all_bench_methods() {
  return {BenchMethod::MiNngp1,    BenchMethod::MiNngp1Bootstrap, BenchMethod::MiNngp2,
          BenchMethod::MiNngp2Bootstrap, BenchMethod::ColumnMean, BenchMethod::CompleteCase,
          BenchMethod::CompleteData};
}

inline BenchMethod bench_method_from_string(const std::string& name) {
  for (auto m : all_bench_methods())
    if (name == to_string(m)) return m;
  throw validation_error("unknown benchmark method '" + name + "'");
}

struct BenchmarkOptions {
  std::vector<BenchMethod> methods = all_bench_methods();
  int mc = 20;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int m_imputations = 10;
  int burn_in = 10;            // MI-NNGP2
  int bootstrap_burn_in = 2;   // each MI-NNGP2-BS track
  int thinning = 1;
  NetworkConfig network{};
  double observation_noise = 0.0;
  // Reported coefficient: 1 is the first predictor (0 is the intercept).
  Index coefficient = 1;
  double confidence_level = 0.95;
};

struct BenchmarkRow {
  BenchMethod method;
  MetricsReport metrics;
};

/// Seed of Monte-Carlo replicate r under the run seed.
inline std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t r) {
  return RngStream(seed, StreamKey{StreamPurpose::Replicate, r, 0, 0, 0})();
}

namespace detail {

inline ReplicateOutcome pool_and_score(const Scenario& s, std::span<const Eigen::MatrixXd> completed,
                                       bool score, const BenchmarkOptions& options) {
  ReplicateOutcome out;
  if (score) score_imputations(out, s.truth, s.dataset.mask, completed, s.binary_cols);
  std::vector<OlsFit> fits;
  try {
    for (const auto& x : completed) fits.push_back(fit_regression(x, s.regression));
  } catch (const singular_design_error&) {
    return out;
  }
  const PooledEstimate pooled = rubin_pool(fits, completed.front().rows(), options.confidence_level);
  out.coefficient = pooled.coefficients.at(static_cast<std::size_t>(options.coefficient));
  out.has_estimate = true;
  return out;
}

inline ReplicateOutcome run_method(const Scenario& s, BenchMethod method,
                                   const BenchmarkOptions& options, std::uint64_t seed) {
  if (method == BenchMethod::CompleteData) {
    std::vector<Eigen::MatrixXd> one{s.truth};
    return pool_and_score(s, one, false, options);
  }
  if (method == BenchMethod::CompleteCase) {
    const CompleteCases cc = complete_case_filter(s.dataset);
    if (cc.rows.size() <= static_cast<std::size_t>(s.regression.coefficient_count())) return {};
    std::vector<Eigen::MatrixXd> one{cc.data.values};
    return pool_and_score(s, one, false, options);
  }

  ImputationConfig config;
  config.m_imputations = options.m_imputations;
  config.thinning = options.thinning;
  config.network = options.network;
  config.observation_noise = options.observation_noise;
  config.seed = seed;
  config.threads = 1;
  ImputationMethod im = ImputationMethod::ColumnMean;
  switch (method) {
    case BenchMethod::MiNngp1: im = ImputationMethod::MiNngp1; break;
    case BenchMethod::MiNngp1Bootstrap: im = ImputationMethod::MiNngp1Bootstrap; break;
    case BenchMethod::MiNngp2:
      im = ImputationMethod::MiNngp2;
      config.burn_in = options.burn_in;
      break;
    case BenchMethod::MiNngp2Bootstrap:
      im = ImputationMethod::MiNngp2Bootstrap;
      config.burn_in = options.bootstrap_burn_in;
      break;
    default: break;
  }

  const auto [encoded, encoding] = encode_binary(s.dataset);
  const ImputedSet set = impute(encoded, im, config);
  std::vector<Eigen::MatrixXd> decoded;
  decoded.reserve(set.imputations.size());
  for (const auto& x : set.imputations) decoded.push_back(decode_binary(x, encoding));
  ReplicateOutcome out = pool_and_score(s, decoded, true, options);
  out.seconds_per_imputation =
      set.diagnostics.total_seconds / static_cast<double>(set.imputations.size());
  return out;
}

}  // namespace detail

/// Monte-Carlo benchmark: each replicate generates a dataset from `config`
/// (seeded per replicate), imputes it with every selected method, fits the
/// analysis model, pools by Rubin's rules and scores against the truth.
/// Replicates run in parallel; results are independent of the thread count.
inline std::vector<BenchmarkRow> run_benchmark(const SynthConfig& config, const BenchmarkOptions& options) {
  if (options.mc < 1) throw validation_error("benchmark needs at least one Monte-Carlo replicate");
  const auto mc = static_cast<std::size_t>(options.mc);
  const std::size_t methods = options.methods.size();
  std::vector<std::vector<ReplicateOutcome>> outcomes(methods, std::vector<ReplicateOutcome>(mc));
  config.validate();
  if (options.coefficient < 1 || options.coefficient > 3)
    throw validation_error("benchmark coefficient must be one of the three predictors (1..3)");
  const double true_beta = 1.0;  // every generator uses beta = (1, 1, 1)
  parallel_for(mc, options.threads, [&](std::size_t r) {
    SynthConfig c = config;
    c.seed = replicate_seed(options.seed, r);
    const Scenario s = generate_scenario(c);
    for (std::size_t k = 0; k < methods; ++k)
      outcomes[k][r] = detail::run_method(s, options.methods[k], options, c.seed);
  });
  std::vector<BenchmarkRow> rows;
  for (std::size_t k = 0; k < methods; ++k)
    rows.push_back({options.methods[k], evaluate_run(outcomes[k], true_beta)});
  return rows;
}

}  // namespace nngp
