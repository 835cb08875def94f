#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nngp/dataset.hpp"
#include "nngp/errors.hpp"
#include "nngp/kernel.hpp"
#include "nngp/parallel.hpp"
#include "nngp/rng.hpp"
#include "nngp/sampler.hpp"

namespace nngp {

enum class InitMethod { MiNngp1, ColumnMean, Provided };

struct ImputationConfig {
  int m_imputations = 10;
  int burn_in = 2;
  int thinning = 1;
  bool bootstrap = false;
  NetworkConfig network{};
  InitMethod init_method = InitMethod::MiNngp1;
  double observation_noise = 0.0;
  std::uint64_t seed = 0;
  bool center_columns = false;
  JitterPolicy jitter{};
  unsigned threads = 1;

  void validate() const {
    if (m_imputations < 1) throw validation_error("m_imputations must be at least 1");
    if (burn_in < 0) throw validation_error("burn_in must be non-negative");
    if (thinning < 1) throw validation_error("thinning must be at least 1");
    if (!(observation_noise >= 0.0)) throw validation_error("observation_noise must be non-negative");
    network.validate();
  }
};

struct ImputationDiagnostics {
  std::vector<int> jitter_events;  // per output imputation
  double max_jitter = 0.0;
  int clamped_variances = 0;
  int bootstrap_retries = 0;
  std::map<std::size_t, double> pattern_seconds;  // pattern index -> cumulative wall time
  double total_seconds = 0.0;

  void merge(const ImputationDiagnostics& other) {
    max_jitter = std::max(max_jitter, other.max_jitter);
    clamped_variances += other.clamped_variances;
    bootstrap_retries += other.bootstrap_retries;
    for (const auto& [k, s] : other.pattern_seconds) pattern_seconds[k] += s;
  }
};

struct ImputedSet {
  std::vector<Eigen::MatrixXd> imputations;
  ImputationDiagnostics diagnostics;
  ImputationConfig provenance;
  std::string method;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Dataset prepared for imputation: values optionally centered by observed
/// column means, unobserved cells zero-filled.
struct WorkingData {
  Eigen::MatrixXd values;
  Eigen::RowVectorXd offsets;

  WorkingData(const Dataset& dataset, bool center) {
    const Index p = dataset.cols();
    offsets = Eigen::RowVectorXd::Zero(p);
    if (center) {
      for (Index j = 0; j < p; ++j) {
        double sum = 0.0;
        Index count = 0;
        for (Index i = 0; i < dataset.rows(); ++i)
          if (dataset.mask(i, j)) {
            sum += dataset.values(i, j);
            ++count;
          }
        if (count > 0) offsets(j) = sum / static_cast<double>(count);
      }
    }
    values = dataset.mask.select(dataset.values.rowwise() - offsets,
                                 Eigen::MatrixXd::Zero(dataset.rows(), p));
  }

  Eigen::MatrixXd to_working(const Eigen::MatrixXd& original) const {
    return original.rowwise() - offsets;
  }

  /// Undo centering and copy observed cells back verbatim.
  Eigen::MatrixXd finish(const Eigen::MatrixXd& working, const Dataset& dataset) const {
    Eigen::MatrixXd out = working.rowwise() + offsets;
    return dataset.mask.select(dataset.values, out);
  }
};

struct PatternPosterior {
  PosteriorBlocks blocks;
  ConditionalGaussian conditional;
  MvnSampler sampler;
};

inline PatternPosterior pattern_posterior(const KernelMatrix& kernel, const IndexList& obs,
                                          const IndexList& mis, const ImputationConfig& config,
                                          std::size_t pattern) {
  if (obs.empty())
    throw unsupported_input_error("pattern " + std::to_string(pattern) +
                                  " has no observed columns; rows with every value missing "
                                  "cannot be imputed");
  try {
    PosteriorBlocks blocks = partition_sigma(kernel, obs, mis, config.jitter, config.observation_noise);
    ConditionalGaussian cg = conditional_gaussian(blocks);
    MvnSampler sampler(cg.cov, 1e-4, cg.prior_scale);
    return {std::move(blocks), std::move(cg), std::move(sampler)};
  } catch (const singular_kernel_error& e) {
    throw singular_kernel_error("pattern " + std::to_string(pattern) + ": " + e.what(),
                                e.condition_estimate());
  }
}

inline KernelMatrix kernel_over_rows(const Eigen::MatrixXd& x, const IndexList& rows,
                                     const ImputationConfig& config) {
  if (rows.empty()) throw unsupported_input_error("input row set for the kernel is empty");
  const Eigen::MatrixXd points = x(rows, Eigen::all);
  return build_kernel_matrix(points, config.network, config.threads);
}

/// Draws the missing block of every row in `rows` into `target`, reading the
/// known values from `source`. Stream for row i is (m, pattern, cycle, i).
inline void draw_rows(const Eigen::MatrixXd& source, Eigen::MatrixXd& target, const IndexList& rows,
                      const IndexList& obs, const IndexList& mis, const PatternPosterior& post,
                      std::uint64_t seed, std::uint64_t m, std::size_t pattern, std::uint64_t cycle,
                      unsigned threads) {
  parallel_for(rows.size(), threads, [&](std::size_t t) {
    const Index i = rows[t];
    const Eigen::VectorXd x_obs = source(i, obs).transpose();
    const Eigen::VectorXd mean = post.conditional.mean_map * x_obs;
    RngStream rng(seed, StreamKey{StreamPurpose::PosteriorDraw, m, pattern, cycle,
                                  static_cast<std::uint64_t>(i)});
    target(i, mis) = post.sampler.draw(mean, rng).transpose();
  });
}

inline std::vector<std::size_t> patterns_to_impute(const PatternPartition& partition) {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < partition.k(); ++q)
    if (!partition.mis_cols[q].empty()) out.push_back(q);
  return out;
}

inline void check_partition(const Dataset& dataset, const PatternPartition& partition) {
  if (partition.row_count() != dataset.rows())
    throw validation_error("partition does not cover the dataset's rows");
}

inline void record_jitter(ImputationDiagnostics& diag, const PatternPosterior& post, int& events) {
  if (post.blocks.jitter_used > 0.0) ++events;
  diag.max_jitter = std::max(diag.max_jitter, post.blocks.jitter_used);
  diag.clamped_variances += post.conditional.clamped_variances;
}

/// One MI-NNGP1 pass with an explicit input row set, writing draw `m` of every
/// incomplete row into `out`.
inline void impute_from_rows(const WorkingData& work, const PatternPartition& partition,
                             const IndexList& input_rows, const ImputationConfig& config,
                             std::uint64_t m, Eigen::MatrixXd& out, ImputationDiagnostics& diag,
                             int& jitter_events) {
  const KernelMatrix kernel = kernel_over_rows(work.values, input_rows, config);
  for (std::size_t q : patterns_to_impute(partition)) {
    const auto start = Clock::now();
    const PatternPosterior post =
        pattern_posterior(kernel, partition.obs_cols[q], partition.mis_cols[q], config, q);
    record_jitter(diag, post, jitter_events);
    draw_rows(work.values, out, partition.rows[q], partition.obs_cols[q], partition.mis_cols[q],
              post, config.seed, m, q, 0, config.threads);
    diag.pattern_seconds[q] += seconds_since(start);
  }
}

}  // namespace detail

/// MI-NNGP1: every incomplete pattern is imputed from the complete cases,
/// drawing M times from one shared posterior per pattern.
inline ImputedSet mi_nngp1(const Dataset& dataset, const PatternPartition& partition,
                           const ImputationConfig& config) {
  config.validate();
  detail::check_partition(dataset, partition);
  if (config.bootstrap) throw validation_error("mi_nngp1: bootstrap requested; use mi_nngp1_bootstrap");
  const auto start = detail::Clock::now();
  ImputedSet result{{}, {}, config, "mi-nngp1"};
  const detail::WorkingData work(dataset, config.center_columns);
  const auto patterns = detail::patterns_to_impute(partition);
  const auto m_count = static_cast<std::size_t>(config.m_imputations);
  result.imputations.assign(m_count, work.values);
  int events = 0;

  if (!patterns.empty()) {
    if (!partition.has_complete_cases())
      throw unsupported_input_error(
          "mi-nngp1 needs complete cases; use mi-nngp2 with column-mean initialization");
    const KernelMatrix kernel = detail::kernel_over_rows(work.values, partition.rows.front(), config);
    for (std::size_t q : patterns) {
      const auto t0 = detail::Clock::now();
      const auto post = detail::pattern_posterior(kernel, partition.obs_cols[q],
                                                  partition.mis_cols[q], config, q);
      detail::record_jitter(result.diagnostics, post, events);
      const auto& rows = partition.rows[q];
      const auto& obs = partition.obs_cols[q];
      const auto& mis = partition.mis_cols[q];
      parallel_for(rows.size() * m_count, config.threads, [&](std::size_t job) {
        const std::size_t m = job % m_count;
        const Index i = rows[job / m_count];
        const Eigen::VectorXd x_obs = work.values(i, obs).transpose();
        const Eigen::VectorXd mean = post.conditional.mean_map * x_obs;
        RngStream rng(config.seed, StreamKey{StreamPurpose::PosteriorDraw, m, q, 0,
                                             static_cast<std::uint64_t>(i)});
        result.imputations[m](i, mis) = post.sampler.draw(mean, rng).transpose();
      });
      result.diagnostics.pattern_seconds[q] += detail::seconds_since(t0);
    }
  }
  for (auto& x : result.imputations) x = work.finish(x, dataset);
  result.diagnostics.jitter_events.assign(m_count, events);
  result.diagnostics.total_seconds = detail::seconds_since(start);
  return result;
}

namespace detail {

/// Core MI-NNGP2 loop on a working-scale initial matrix. `track` separates
/// the random streams of parallel bootstrap tracks.
inline ImputedSet mi_nngp2_working(const Dataset& dataset, const PatternPartition& partition,
                                   const WorkingData& work, Eigen::MatrixXd current,
                                   const ImputationConfig& config, std::uint64_t track) {
  ImputedSet result{{}, {}, config, "mi-nngp2"};
  const auto patterns = patterns_to_impute(partition);
  const int cycles = config.burn_in + config.m_imputations * config.thinning;
  if (patterns.empty()) {
    result.imputations.assign(static_cast<std::size_t>(config.m_imputations), work.finish(current, dataset));
    result.diagnostics.jitter_events.assign(static_cast<std::size_t>(config.m_imputations), 0);
    return result;
  }
  std::vector<IndexList> input_rows;
  for (std::size_t q : patterns) {
    input_rows.push_back(partition.complement_rows(q));
    if (input_rows.back().empty())
      throw unsupported_input_error("mi-nngp2: pattern " + std::to_string(q) +
                                    " covers every row, so no input rows remain for its kernel");
  }

  int events = 0;
  for (int l = 1; l <= cycles; ++l) {
    for (std::size_t t = 0; t < patterns.size(); ++t) {
      const std::size_t q = patterns[t];
      const auto t0 = Clock::now();
      const KernelMatrix kernel = kernel_over_rows(current, input_rows[t], config);
      const auto post = pattern_posterior(kernel, partition.obs_cols[q], partition.mis_cols[q], config, q);
      record_jitter(result.diagnostics, post, events);
      draw_rows(current, current, partition.rows[q], partition.obs_cols[q], partition.mis_cols[q],
                post, config.seed, track, q, static_cast<std::uint64_t>(l), config.threads);
      result.diagnostics.pattern_seconds[q] += seconds_since(t0);
    }
    if (l > config.burn_in && (l - config.burn_in) % config.thinning == 0) {
      result.imputations.push_back(work.finish(current, dataset));
      result.diagnostics.jitter_events.push_back(events);
      events = 0;
    }
  }
  return result;
}

inline void check_initial(const Dataset& dataset, const Eigen::MatrixXd& initial) {
  if (initial.rows() != dataset.rows() || initial.cols() != dataset.cols())
    throw validation_error("initial imputation has the wrong shape");
  for (Index j = 0; j < dataset.cols(); ++j)
    for (Index i = 0; i < dataset.rows(); ++i) {
      if (dataset.mask(i, j) && initial(i, j) != dataset.values(i, j))
        throw validation_error("initial imputation disagrees with observed cell (" +
                               std::to_string(i) + ", " + std::to_string(j) + ")");
      if (!std::isfinite(initial(i, j)))
        throw validation_error("initial imputation has a non-finite cell (" + std::to_string(i) +
                               ", " + std::to_string(j) + ")");
    }
}

}  // namespace detail

/// MI-NNGP2: Gibbs-style sweeps over the incomplete patterns, each imputed
/// from all other rows of the current completed matrix. After N burn-in
/// cycles every T-th cycle is kept, giving M imputations.
inline ImputedSet mi_nngp2(const Dataset& dataset, const PatternPartition& partition,
                           const Eigen::MatrixXd& initial, const ImputationConfig& config) {
  config.validate();
  detail::check_partition(dataset, partition);
  if (config.bootstrap) throw validation_error("mi_nngp2: bootstrap requested; use mi_nngp2_bootstrap");
  detail::check_initial(dataset, initial);
  const auto start = detail::Clock::now();
  const detail::WorkingData work(dataset, config.center_columns);
  ImputedSet result =
      detail::mi_nngp2_working(dataset, partition, work, work.to_working(initial), config, 0);
  result.diagnostics.total_seconds = detail::seconds_since(start);
  return result;
}

/// Bootstrap resample of the complete-case rows (sorted for locality; order
/// does not affect the kernel).
inline IndexList bootstrap_rows(const IndexList& complete_rows, std::uint64_t seed, std::uint64_t m,
                                std::uint64_t attempt) {
  RngStream rng(seed, StreamKey{StreamPurpose::Bootstrap, m, 0, attempt, 0});
  IndexList out(complete_rows.size());
  for (auto& r : out) r = complete_rows[rng.index_below(complete_rows.size())];
  std::sort(out.begin(), out.end());
  return out;
}

inline constexpr int kBootstrapRetries = 5;

/// MI-NNGP1 with bootstrap: imputation m uses its own resample of the
/// complete cases as kernel input and draws once per row. When
/// `forced_rows` is given, entry m replaces the resample of imputation m.
inline ImputedSet mi_nngp1_bootstrap(const Dataset& dataset, const PatternPartition& partition,
                                     const ImputationConfig& config,
                                     const std::vector<IndexList>* forced_rows = nullptr) {
  config.validate();
  detail::check_partition(dataset, partition);
  const auto start = detail::Clock::now();
  const auto m_count = static_cast<std::size_t>(config.m_imputations);
  if (forced_rows && forced_rows->size() != m_count)
    throw validation_error("mi_nngp1_bootstrap: need one forced row set per imputation");
  const detail::WorkingData work(dataset, config.center_columns);
  ImputedSet result{{}, {}, config, "mi-nngp1-bs"};
  result.imputations.assign(m_count, work.values);
  result.diagnostics.jitter_events.assign(m_count, 0);

  if (!detail::patterns_to_impute(partition).empty()) {
    if (!partition.has_complete_cases())
      throw unsupported_input_error(
          "mi-nngp1-bs needs complete cases; use mi-nngp2 with column-mean initialization");
    std::vector<ImputationDiagnostics> per_m(m_count);
    ImputationConfig inner = config;
    inner.threads = 1;
    parallel_for(m_count, config.threads, [&](std::size_t m) {
      for (int attempt = 0;; ++attempt) {
        const IndexList rows = forced_rows ? (*forced_rows)[m]
                                           : bootstrap_rows(partition.rows.front(), config.seed, m,
                                                            static_cast<std::uint64_t>(attempt));
        try {
          per_m[m] = {};
          int events = 0;
          detail::impute_from_rows(work, partition, rows, inner, m, result.imputations[m], per_m[m], events);
          per_m[m].bootstrap_retries = attempt;
          per_m[m].jitter_events = {events};
          return;
        } catch (const singular_kernel_error&) {
          if (forced_rows || attempt >= kBootstrapRetries) throw;
        } catch (const domain_error&) {
          // A resample can make a column all-zero over the input rows.
          if (forced_rows || attempt >= kBootstrapRetries) throw;
        }
      }
    });
    for (std::size_t m = 0; m < m_count; ++m) {
      result.diagnostics.merge(per_m[m]);
      result.diagnostics.jitter_events[m] = per_m[m].jitter_events.front();
    }
  }
  for (auto& x : result.imputations) x = work.finish(x, dataset);
  result.diagnostics.total_seconds = detail::seconds_since(start);
  return result;
}

/// MI-NNGP2 with bootstrap: M independent MI-NNGP2 tracks (one imputation
/// each, burn-in N) started from the MI-NNGP1-BS imputations.
inline ImputedSet mi_nngp2_bootstrap(const Dataset& dataset, const PatternPartition& partition,
                                     const ImputationConfig& config) {
  config.validate();
  detail::check_partition(dataset, partition);
  const auto start = detail::Clock::now();
  const auto m_count = static_cast<std::size_t>(config.m_imputations);
  ImputedSet initial = mi_nngp1_bootstrap(dataset, partition, config);
  ImputedSet result{{}, initial.diagnostics, config, "mi-nngp2-bs"};
  result.imputations.resize(m_count);
  const detail::WorkingData work(dataset, config.center_columns);

  ImputationConfig track_config = config;
  track_config.m_imputations = 1;
  track_config.bootstrap = false;
  track_config.threads = 1;
  std::vector<ImputedSet> tracks(m_count);
  parallel_for(m_count, config.threads, [&](std::size_t m) {
    tracks[m] = detail::mi_nngp2_working(dataset, partition, work,
                                         work.to_working(initial.imputations[m]), track_config, m + 1);
  });
  for (std::size_t m = 0; m < m_count; ++m) {
    result.imputations[m] = std::move(tracks[m].imputations.front());
    result.diagnostics.jitter_events[m] += tracks[m].diagnostics.jitter_events.front();
    result.diagnostics.merge(tracks[m].diagnostics);
  }
  result.diagnostics.total_seconds = detail::seconds_since(start);
  return result;
}

/// Replaces each missing cell by its column's observed mean.
inline Eigen::MatrixXd column_mean_impute(const Dataset& dataset) {
  Eigen::MatrixXd out = dataset.values;
  for (Index j = 0; j < dataset.cols(); ++j) {
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < dataset.rows(); ++i)
      if (dataset.mask(i, j)) {
        sum += dataset.values(i, j);
        ++count;
      }
    if (count == 0) throw validation_error("column " + std::to_string(j) + " is entirely missing");
    const double mean = sum / static_cast<double>(count);
    for (Index i = 0; i < dataset.rows(); ++i)
      if (!dataset.mask(i, j)) out(i, j) = mean;
  }
  return out;
}

struct CompleteCases {
  Dataset data;
  IndexList rows;
  bool empty = true;
};

inline CompleteCases complete_case_filter(const Dataset& dataset) {
  CompleteCases out;
  for (Index i = 0; i < dataset.rows(); ++i)
    if (dataset.mask.row(i).all()) out.rows.push_back(i);
  out.data = select_rows(dataset, out.rows);
  out.empty = out.rows.empty();
  return out;
}

enum class ImputationMethod { MiNngp1, MiNngp1Bootstrap, MiNngp2, MiNngp2Bootstrap, ColumnMean };

inline const char* to_string(ImputationMethod m) {
  switch (m) {
    case ImputationMethod::MiNngp1: return "mi-nngp1";
    case ImputationMethod::MiNngp1Bootstrap: return "mi-nngp1-bs";
    case ImputationMethod::MiNngp2: return "mi-nngp2";
    case ImputationMethod::MiNngp2Bootstrap: return "mi-nngp2-bs";
    case ImputationMethod::ColumnMean: return "colmean";
  }
  return "?";
}

inline ImputationMethod imputation_method_from_string(const std::string& name) {
  for (auto m : {ImputationMethod::MiNngp1, ImputationMethod::MiNngp1Bootstrap,
                 ImputationMethod::MiNngp2, ImputationMethod::MiNngp2Bootstrap,
                 ImputationMethod::ColumnMean})
    if (name == to_string(m)) return m;
  throw validation_error("unknown imputation method '" + name + "'");
}

/// Runs `method` end to end. MI-NNGP2 is initialized per `config.init_method`
/// (falling back to column means when MI-NNGP1 is requested but no complete
/// cases exist); `initial` is required for InitMethod::Provided.
inline ImputedSet impute(const Dataset& dataset, ImputationMethod method, ImputationConfig config,
                         const std::optional<Eigen::MatrixXd>& initial = std::nullopt) {
  const PatternPartition partition = detect_patterns(dataset);
  switch (method) {
    case ImputationMethod::MiNngp1:
      config.bootstrap = false;
      return mi_nngp1(dataset, partition, config);
    case ImputationMethod::MiNngp1Bootstrap:
      config.bootstrap = true;
      return mi_nngp1_bootstrap(dataset, partition, config);
    case ImputationMethod::MiNngp2Bootstrap:
      config.bootstrap = true;
      return mi_nngp2_bootstrap(dataset, partition, config);
    case ImputationMethod::ColumnMean: {
      const auto start = detail::Clock::now();
      ImputedSet out{{column_mean_impute(dataset)}, {}, config, "colmean"};
      out.provenance.m_imputations = 1;
      out.diagnostics.jitter_events = {0};
      out.diagnostics.total_seconds = detail::seconds_since(start);
      return out;
    }
    case ImputationMethod::MiNngp2: break;
  }
  config.bootstrap = false;
  Eigen::MatrixXd start_matrix;
  double init_seconds = 0.0;
  if (config.init_method == InitMethod::Provided) {
    if (!initial) throw validation_error("init method 'provided' needs an initial imputation");
    start_matrix = *initial;
  } else if (config.init_method == InitMethod::MiNngp1 && partition.has_complete_cases()) {
    ImputationConfig init = config;
    init.m_imputations = 1;
    ImputedSet first = mi_nngp1(dataset, partition, init);
    init_seconds = first.diagnostics.total_seconds;
    start_matrix = std::move(first.imputations.front());
  } else {
    start_matrix = column_mean_impute(dataset);
  }
  ImputedSet out = mi_nngp2(dataset, partition, start_matrix, config);
  out.diagnostics.total_seconds += init_seconds;
  return out;
}

}  // namespace nngp
