#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nngp/dataset.hpp"
#include "nngp/errors.hpp"
#include "nngp/inference.hpp"
#include "nngp/rng.hpp"

namespace nngp {

// Column references in generator configs are 1-based, as in the published
// experiment descriptions. Everything else in the library is 0-based.

/// Inclusive 1-based column range [first, last].
struct ColumnRange {
  Index first = 1;
  Index last = 0;

  Index size() const { return last >= first ? last - first + 1 : 0; }
  bool contains(Index one_based) const { return one_based >= first && one_based <= last; }
};

enum class Distribution { Gaussian, Exponential, StdNormal };

/// Gaussian(sd) or Exponential(mean); StdNormal ignores `param`.
struct NoiseSpec {
  Distribution kind = Distribution::Gaussian;
  double param = 0.1;

  double draw(RngStream& rng) const {
    switch (kind) {
      case Distribution::Gaussian: return param * rng.normal();
      case Distribution::Exponential: return rng.exponential(1.0 / param);
      case Distribution::StdNormal: return rng.normal();
    }
    return 0.0;
  }
};

enum class Mechanism { MCAR, MAR, MNAR };

/// Which columns of each run of 5 (or 10) move to the right-hand blocks.
enum class Rearrangement { Fifths, Tenths };

inline const char* to_string(Mechanism m) {
  return m == Mechanism::MCAR ? "mcar" : m == Mechanism::MAR ? "mar" : "mnar";
}

struct SynthConfig {
  Index n = 200;
  Index p = 250;
  double rho = 0.95;
  NoiseSpec noise{Distribution::Gaussian, 0.1};
  NoiseSpec first_col{Distribution::StdNormal, 1.0};
  double sigma1 = 0.5;
  std::array<Index, 3> q{210, 220, 230};
  std::array<double, 6> a{1.0, -2.0, 3.0, 0.0, 2.0, -2.0};
  Mechanism mechanism = Mechanism::MAR;
  double mcar_rate = 0.5;
  bool binary_append = false;
  Rearrangement rearrangement = Rearrangement::Fifths;
  // Explicit masked blocks and logit driver range; derived from p when unset.
  std::optional<std::array<ColumnRange, 2>> blocks;
  std::optional<ColumnRange> mar_drivers;
  std::uint64_t seed = 0;

  /// Feature columns including the appended binary one.
  Index feature_cols() const { return p + (binary_append ? 1 : 0); }

  std::array<ColumnRange, 2> masked_blocks() const {
    if (blocks) return *blocks;
    return {ColumnRange{3 * p / 5 + 1, 4 * p / 5}, ColumnRange{4 * p / 5 + 1, feature_cols()}};
  }

  void validate() const {
    if (n < 2 || p < 5) throw validation_error("synthetic: need n >= 2 and p >= 5");
    if (!(rho > -1.0 && rho < 1.0)) throw validation_error("synthetic: rho must lie in (-1, 1)");
    for (Index c : q)
      if (c < 1 || c > feature_cols()) throw validation_error("synthetic: predictor index out of range");
    if (binary_append && p < 100) throw validation_error("synthetic: binary feature needs p >= 100");
    if (!blocks && p % 5 != 0) throw validation_error("synthetic: p must be divisible by 5");
    for (const auto& b : masked_blocks())
      if (b.first < 1 || b.last > feature_cols() || b.size() == 0)
        throw validation_error("synthetic: masked block out of range");
  }
};

/// AR(1) columns: a_1 from `first_col`, a_j = rho a_{j-1} + noise.
inline Eigen::MatrixXd gen_ar1(const SynthConfig& config) {
  RngStream rng(config.seed, StreamKey{StreamPurpose::Generator, 1, 0, 0, 0});
  Eigen::MatrixXd a(config.n, config.p);
  for (Index i = 0; i < config.n; ++i) a(i, 0) = config.first_col.draw(rng);
  for (Index j = 1; j < config.p; ++j)
    for (Index i = 0; i < config.n; ++i) a(i, j) = config.rho * a(i, j - 1) + config.noise.draw(rng);
  return a;
}

/// Source column (0-based) of every output column. Fifths: within each run
/// of five, the 4th columns move right, then the 5th columns further right.
/// Tenths: the 7th/9th columns, then the 8th/10th. Columns past the largest
/// complete run stay at the end in order.
inline IndexList rearrangement_order(Index p, Rearrangement kind = Rearrangement::Fifths) {
  const Index run = kind == Rearrangement::Fifths ? 5 : 10;
  const Index prefix = (p / run) * run;
  auto stays = [&](Index j) { return kind == Rearrangement::Fifths ? j % 5 < 3 : j % 10 < 6; };
  auto first_move = [&](Index j) {
    return kind == Rearrangement::Fifths ? j % 5 == 3 : (j % 10 == 6 || j % 10 == 8);
  };
  IndexList order;
  order.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < prefix; ++j)
    if (stays(j)) order.push_back(j);
  for (Index j = 0; j < prefix; ++j)
    if (first_move(j)) order.push_back(j);
  for (Index j = 0; j < prefix; ++j)
    if (!stays(j) && !first_move(j)) order.push_back(j);
  for (Index j = prefix; j < p; ++j) order.push_back(j);
  return order;
}

inline Eigen::MatrixXd rearrange_columns(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                         Rearrangement kind = Rearrangement::Fifths) {
  return a(Eigen::all, rearrangement_order(a.cols(), kind));
}

/// y = x_q1 + x_q2 + x_q3 + N(0, sigma1^2); q is 1-based.
inline Eigen::VectorXd gen_response(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                    const std::array<Index, 3>& q, double sigma1, RngStream& rng) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.rows());
  for (Index c : q) {
    if (c < 1 || c > x.cols()) throw validation_error("gen_response: predictor index out of range");
    y += x.col(c - 1);
  }
  for (Index i = 0; i < y.size(); ++i) y(i) += sigma1 * rng.normal();
  return y;
}

/// Row-level logit model masking one block of columns:
/// logit P(R = 1) = intercept + driver_coef * mean(drivers) + response_coef * y.
struct LogitBlock {
  ColumnRange target;
  IndexList drivers;  // 1-based
  double intercept = 0.0;
  double driver_coef = 0.0;
  double response_coef = 0.0;
};

inline IndexList range_columns(const ColumnRange& r) {
  IndexList out;
  for (Index j = r.first; j <= r.last; ++j) out.push_back(j);
  return out;
}

inline double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

/// Draws a row indicator per block and clears the block's cells on rows with
/// R = 1. `mask` has one column per feature (response excluded).
inline MaskMatrix logit_block_mask(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                   const Eigen::Ref<const Eigen::VectorXd>& y,
                                   const std::vector<LogitBlock>& blocks, RngStream& rng) {
  MaskMatrix mask = MaskMatrix::Constant(x.rows(), x.cols(), true);
  for (const auto& b : blocks) {
    if (b.target.first < 1 || b.target.last > x.cols())
      throw validation_error("mask block out of range");
    for (Index j : b.drivers)
      if (j < 1 || j > x.cols()) throw validation_error("mask driver column out of range");
  }
  for (Index i = 0; i < x.rows(); ++i) {
    for (const auto& b : blocks) {
      double drive = 0.0;
      for (Index j : b.drivers) drive += x(i, j - 1);
      if (!b.drivers.empty()) drive /= static_cast<double>(b.drivers.size());
      const double eta = b.intercept + b.driver_coef * drive + b.response_coef * y(i);
      if (rng.bernoulli(logistic(eta)))
        for (Index j = b.target.first; j <= b.target.last; ++j) mask(i, j - 1) = false;
    }
  }
  return mask;
}

/// Logit blocks for the MAR design: both indicators driven by the mean of
/// the always-observed leading columns and by y.
inline std::vector<LogitBlock> mar_blocks(const SynthConfig& config) {
  const auto blocks = config.masked_blocks();
  const ColumnRange drivers = config.mar_drivers.value_or(ColumnRange{1, 3 * config.p / 5});
  const auto& a = config.a;
  return {LogitBlock{blocks[0], range_columns(drivers), a[0], a[1], a[2]},
          LogitBlock{blocks[1], range_columns(drivers), a[3], a[4], a[5]}};
}

/// MNAR design: indicator 1 driven by the mean of block 2's features and
/// indicator 2 by block 1's (the appended binary column is not a driver).
inline std::vector<LogitBlock> mnar_blocks(const SynthConfig& config) {
  const auto blocks = config.masked_blocks();
  auto features_of = [&](ColumnRange r) {
    r.last = std::min(r.last, config.p);
    return range_columns(r);
  };
  const auto& a = config.a;
  return {LogitBlock{blocks[0], features_of(blocks[1]), a[0], a[1], a[2]},
          LogitBlock{blocks[1], features_of(blocks[0]), a[3], a[4], a[5]}};
}

inline MaskMatrix gen_mar_mask(const Eigen::Ref<const Eigen::MatrixXd>& x,
                               const Eigen::Ref<const Eigen::VectorXd>& y, const SynthConfig& config,
                               RngStream& rng) {
  return logit_block_mask(x, y, mar_blocks(config), rng);
}

inline MaskMatrix gen_mnar_mask(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y, const SynthConfig& config,
                                RngStream& rng) {
  return logit_block_mask(x, y, mnar_blocks(config), rng);
}

/// MCAR: each block is masked on a row independently with probability `rate`.
inline MaskMatrix gen_mcar_mask(const Eigen::Ref<const Eigen::MatrixXd>& x, const SynthConfig& config,
                                RngStream& rng) {
  const double rate = config.mcar_rate;
  if (!(rate >= 0.0 && rate <= 1.0)) throw validation_error("MCAR rate must lie in [0, 1]");
  const auto blocks = config.masked_blocks();
  MaskMatrix mask = MaskMatrix::Constant(x.rows(), x.cols(), true);
  for (Index i = 0; i < x.rows(); ++i)
    for (const auto& b : blocks)
      if (rng.bernoulli(rate))
        for (Index j = b.first; j <= b.last; ++j) mask(i, j - 1) = false;
  return mask;
}

/// Appends x_{p+1} = 1{x_10 + x_50 + x_100 > 0}.
inline Eigen::MatrixXd append_binary(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() < 100) throw validation_error("append_binary: needs at least 100 columns");
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()) = ((x.col(9) + x.col(49) + x.col(99)).array() > 0.0).cast<double>();
  return out;
}

/// One generated benchmark dataset. Column layout: features (including an
/// appended binary feature), then y. `dataset.values` holds the truth under
/// masked cells; the mask alone marks them missing.
struct Scenario {
  Dataset dataset;
  Eigen::MatrixXd truth;
  std::vector<double> true_beta;  // per predictor, excluding the intercept
  RegressionSpec regression;
  IndexList binary_cols;
};

inline Scenario assemble_scenario(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                  const MaskMatrix& feature_mask, const std::array<Index, 3>& q,
                                  bool has_binary) {
  const Index n = x.rows(), f = x.cols();
  Scenario s;
  s.truth.resize(n, f + 1);
  s.truth.leftCols(f) = x;
  s.truth.col(f) = y;
  s.dataset.values = s.truth;
  s.dataset.mask = MaskMatrix::Constant(n, f + 1, true);
  s.dataset.mask.leftCols(f) = feature_mask;
  s.dataset.column_kinds.assign(static_cast<std::size_t>(f + 1), ColumnKind::Continuous);
  if (has_binary) {
    s.dataset.column_kinds[static_cast<std::size_t>(f - 1)] = ColumnKind::Binary;
    s.binary_cols.push_back(f - 1);
  }
  s.dataset.response_col = f;
  for (Index j = 0; j < f; ++j) s.dataset.column_names.push_back("x" + std::to_string(j + 1));
  s.dataset.column_names.push_back("y");
  for (Index c : q) s.regression.predictor_cols.push_back(c - 1);
  s.regression.response_col = f;
  s.true_beta = {1.0, 1.0, 1.0};
  return s;
}

/// Full generator: AR(1) features, rearrangement, optional binary feature,
/// response, and the configured missingness mechanism.
inline Scenario generate_scenario(const SynthConfig& config) {
  config.validate();
  Eigen::MatrixXd x = rearrange_columns(gen_ar1(config), config.rearrangement);
  if (config.binary_append) x = append_binary(x);
  RngStream response_rng(config.seed, StreamKey{StreamPurpose::Generator, 2, 0, 0, 0});
  const Eigen::VectorXd y = gen_response(x, config.q, config.sigma1, response_rng);
  RngStream mask_rng(config.seed, StreamKey{StreamPurpose::Generator, 3, 0, 0, 0});
  MaskMatrix mask;
  switch (config.mechanism) {
    case Mechanism::MAR: mask = gen_mar_mask(x, y, config, mask_rng); break;
    case Mechanism::MNAR: mask = gen_mnar_mask(x, y, config, mask_rng); break;
    case Mechanism::MCAR: mask = gen_mcar_mask(x, config, mask_rng); break;
  }
  return assemble_scenario(x, y, mask, config.q, config.binary_append);
}

/// Settings for the varying-missing-rate experiment (rate in {20,40,60,80}).
inline SynthConfig varying_rate_config(int rate, std::uint64_t seed) {
  SynthConfig c;
  c.n = 200;
  c.p = 1000;
  c.rho = 0.95;
  c.noise = {Distribution::Gaussian, 0.1};
  c.sigma1 = 0.5;
  c.q = {910, 950, 990};
  c.a = {1.0, -2.0, 3.0, 0.0, 2.0, -2.0};
  c.mechanism = Mechanism::MAR;
  c.rearrangement = Rearrangement::Tenths;
  c.mar_drivers = ColumnRange{1, 100};
  switch (rate) {
    case 20: c.blocks = {{ColumnRange{801, 900}, ColumnRange{901, 1000}}}; break;
    case 40: c.blocks = {{ColumnRange{601, 800}, ColumnRange{801, 1000}}}; break;
    case 60: c.blocks = {{ColumnRange{401, 700}, ColumnRange{701, 1000}}}; break;
    case 80: c.blocks = {{ColumnRange{201, 600}, ColumnRange{601, 1000}}}; break;
    default: throw validation_error("varying rate must be 20, 40, 60 or 80");
  }
  c.seed = seed;
  return c;
}

inline Scenario gen_varying_rate(int rate, std::uint64_t seed) {
  return generate_scenario(varying_rate_config(rate, seed));
}

/// Missingness to inject into a complete dataset. Column references are
/// 1-based; the response term uses `dataset.response_col`.
struct InjectionSpec {
  std::vector<LogitBlock> blocks;
  std::uint64_t seed = 0;
};

/// Draws a mask from `spec` on a fully observed dataset. Values are left
/// untouched so they serve as ground truth.
inline Dataset inject_missingness(const Dataset& complete, const InjectionSpec& spec) {
  complete.validate();
  if (!complete.mask.all()) throw validation_error("inject_missingness: dataset must be fully observed");
  const Index p = complete.cols();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(complete.rows());
  for (const auto& b : spec.blocks) {
    if (b.response_coef != 0.0 && !complete.response_col)
      throw validation_error("inject_missingness: response coefficient without a response column");
    if (complete.response_col && b.target.contains(*complete.response_col + 1))
      throw validation_error("inject_missingness: target block covers the response column");
  }
  if (complete.response_col) y = complete.values.col(*complete.response_col);
  RngStream rng(spec.seed, StreamKey{StreamPurpose::Generator, 4, 0, 0, 0});
  Dataset out = complete;
  out.mask = logit_block_mask(complete.values, y, spec.blocks, rng);
  if (out.mask.cols() != p) throw dimension_error("inject_missingness: mask shape mismatch");
  return out;
}

/// Named presets reproducing the published synthetic settings.
inline std::vector<std::string> preset_names() {
  return {"p50-gaussian-mar",   "p50-gaussian-mnar",  "p250-gaussian-mar", "p250-gaussian-mnar",
          "p1000-gaussian-mar", "p1000-gaussian-mnar", "p1000-exp-mar",     "p1000-exp-mnar",
          "discrete-mar",       "discrete-mnar",      "varying-rate-20",   "varying-rate-40",
          "varying-rate-60",    "varying-rate-80"};
}

inline std::optional<SynthConfig> preset(const std::string& name) {
  if (name.rfind("varying-rate-", 0) == 0) {
    try {
      return varying_rate_config(std::stoi(name.substr(13)), 0);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  SynthConfig c;
  const bool mnar = name.size() > 5 && name.substr(name.size() - 5) == "-mnar";
  if (!mnar && !(name.size() > 4 && name.substr(name.size() - 4) == "-mar")) return std::nullopt;
  c.mechanism = mnar ? Mechanism::MNAR : Mechanism::MAR;
  const std::string stem = name.substr(0, name.size() - (mnar ? 5 : 4));
  if (stem == "p50-gaussian") {
    c.p = 50;
    c.q = {40, 44, 48};
  } else if (stem == "p250-gaussian") {
    c.p = 250;
    c.q = {210, 220, 230};
  } else if (stem == "p1000-gaussian") {
    c.p = 1000;
    c.q = {650, 700, 750};
  } else if (stem == "p1000-exp") {
    c.p = 1000;
    c.q = {650, 700, 750};
    c.rho = 0.75;
    c.noise = {Distribution::Exponential, 0.4};
    c.first_col = {Distribution::Exponential, 2.0};
    c.sigma1 = 1.0;
    c.a = {-3.0, -1.0, 1.5, 1.0, 1.5, -1.0};
  } else if (stem == "discrete") {
    c.p = 1000;
    c.q = {1001, 701, 751};
    c.binary_append = true;
    c.a = {-1.0, -2.0, 3.0, 1.0, 2.0, -2.0};
  } else {
    return std::nullopt;
  }
  return c;
}

/// Discrete design scaled to `p` features: binary column appended, predictors
/// (p+1, 0.7p+1, 0.75p+1).
inline SynthConfig discrete_config(Index p, Mechanism mechanism) {
  SynthConfig c = *preset(mechanism == Mechanism::MNAR ? "discrete-mnar" : "discrete-mar");
  c.p = p;
  c.q = {p + 1, 7 * p / 10 + 1, 3 * p / 4 + 1};
  return c;
}

}  // namespace nngp
