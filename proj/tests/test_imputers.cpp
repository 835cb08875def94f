#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <set>

#include "nngp/imputers.hpp"
#include "nngp/synthetic.hpp"

using namespace nngp;

namespace {

// Smooth AR-style toy: rows 0..n-1, three incomplete patterns plus
// complete cases.
Dataset toy(std::uint64_t seed, Index n = 30, Index p = 8) {
  RngStream rng(seed, 0);
  Eigen::MatrixXd v(n, p);
  for (Index i = 0; i < n; ++i) {
    v(i, 0) = rng.normal();
    for (Index j = 1; j < p; ++j) v(i, j) = 0.9 * v(i, j - 1) + 0.3 * rng.normal();
  }
  Dataset d = Dataset::complete(v);
  for (Index i = n / 3; i < n; ++i) {
    const int kind = static_cast<int>(i % 3);
    if (kind == 0) d.mask(i, p - 1) = d.mask(i, p - 2) = false;
    if (kind == 1) d.mask(i, 1) = false;
    if (kind == 2) d.mask(i, 2) = d.mask(i, 3) = false;
  }
  return d;
}

ImputationConfig cfg(int m, std::uint64_t seed = 1) {
  ImputationConfig c;
  c.m_imputations = m;
  c.seed = seed;
  return c;
}

void expect_valid(const ImputedSet& set, const Dataset& d, std::size_t m) {
  ASSERT_EQ(set.imputations.size(), m);
  for (const auto& x : set.imputations) {
    ASSERT_EQ(x.rows(), d.rows());
    ASSERT_EQ(x.cols(), d.cols());
    EXPECT_TRUE(x.allFinite());
    for (Index i = 0; i < d.rows(); ++i)
      for (Index j = 0; j < d.cols(); ++j)
        if (d.mask(i, j)) {
          ASSERT_EQ(x(i, j), d.values(i, j)) << i << "," << j;
        }
  }
}

bool identical(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t m = 0; m < a.size(); ++m)
    if (!(a[m].array() == b[m].array()).all()) return false;
  return true;
}

const ImputationMethod kAll[] = {ImputationMethod::MiNngp1, ImputationMethod::MiNngp1Bootstrap,
                                 ImputationMethod::MiNngp2, ImputationMethod::MiNngp2Bootstrap,
                                 ImputationMethod::ColumnMean};

}  // namespace

TEST(Imputers, FullyObservedGivesCopies) {
  const Dataset d = Dataset::complete(Eigen::MatrixXd::Random(6, 4));
  for (auto method : kAll) {
    const auto set = impute(d, method, cfg(3));
    for (const auto& x : set.imputations) EXPECT_TRUE((x.array() == d.values.array()).all()) << to_string(method);
  }
}

TEST(Imputers, ObservedCellsPreservedAndComplete) {
  const Dataset d = toy(4);
  for (auto method : kAll) {
    for (bool center : {false, true}) {
      ImputationConfig c = cfg(4);
      c.center_columns = center;
      const auto set = impute(d, method, c);
      expect_valid(set, d, method == ImputationMethod::ColumnMean ? 1u : 4u);
      EXPECT_EQ(set.method, to_string(method));
    }
  }
}

TEST(Imputers, DeterministicAcrossThreadCounts) {
  const Dataset d = toy(5);
  for (auto method : kAll) {
    ImputationConfig serial = cfg(5, 99), threaded = cfg(5, 99);
    threaded.threads = 4;
    EXPECT_TRUE(identical(impute(d, method, serial).imputations, impute(d, method, threaded).imputations))
        << to_string(method);
  }
}

TEST(Imputers, TwoPatternToySerialVersusParallelRows) {
  Eigen::MatrixXd v(6, 4);
  v << 1, 2, 3, 4, 0.5, 1.5, 2.5, 3.1, -1, 0.2, 0.8, 2, 2, 2.2, 2.4, 2.6, 0.1, -0.4, 1, 1.2, 3, 1, -1, 0.3;
  Dataset d = Dataset::complete(v);
  for (Index i = 3; i < 6; ++i) d.mask(i, 3) = false;
  ImputationConfig a = cfg(3, 17), b = cfg(3, 17);
  a.burn_in = 2;
  b.burn_in = 2;
  b.threads = 3;
  const auto part = detect_patterns(d);
  const auto init = column_mean_impute(d);
  EXPECT_TRUE(identical(mi_nngp2(d, part, init, a).imputations, mi_nngp2(d, part, init, b).imputations));
}

TEST(Imputers, SeedChangesDraws) {
  const Dataset d = toy(6);
  const auto a = impute(d, ImputationMethod::MiNngp1, cfg(2, 1));
  const auto b = impute(d, ImputationMethod::MiNngp1, cfg(2, 2));
  EXPECT_FALSE(identical(a.imputations, b.imputations));
  EXPECT_FALSE((a.imputations[0].array() == a.imputations[1].array()).all());
}

TEST(MiNngp1, DuplicateColumnInterpolation) {
  Dataset d = toy(7, 20, 6);
  d.values.col(5) = d.values.col(2);
  d.mask.col(5).setConstant(true);
  d.mask(15, 5) = false;
  d.mask(17, 5) = false;
  d.mask.col(2).setConstant(true);
  for (Index i = 0; i < d.rows(); ++i) d.mask(i, 1) = true;
  const auto part = detect_patterns(d);
  const auto set = mi_nngp1(d, part, cfg(6));
  for (const auto& x : set.imputations) {
    EXPECT_NEAR(x(15, 5), d.values(15, 2), 1e-6);
    EXPECT_NEAR(x(17, 5), d.values(17, 2), 1e-6);
  }
}

TEST(MiNngp1, DrawsFollowDenseInverseReference) {
  // Fig.-1 style 8 x 5 layout with a richer complete block.
  Eigen::MatrixXd v(8, 5);
  v << 0.3, -1.2, 0.8, 1.1, -0.4, 1.0, 0.2, -0.5, 0.7, 1.3, 0.6, 1.1, -0.9, -0.2, 0.4, -0.3, 0.5, 1.7,
      -1.1, 0.9, 1.4, -0.8, 0.1, 0.6, -1.5, -0.7, 0.9, 1.2, 0.3, 0.8, 0.2, -0.6, 1.9, -1.0, 0.4, 0.9,
      1.5, -0.3, 0.2, -1.2;
  Dataset d = Dataset::complete(v);
  d.mask(2, 3) = d.mask(2, 4) = d.mask(3, 3) = d.mask(3, 4) = false;
  d.mask(4, 1) = d.mask(4, 4) = d.mask(5, 1) = d.mask(5, 4) = false;
  d.mask(6, 0) = d.mask(6, 1) = d.mask(7, 0) = d.mask(7, 1) = false;
  const auto part = detect_patterns(d);
  ASSERT_EQ(part.k(), 4u);
  ImputationConfig c = cfg(3, 5);
  const auto set = mi_nngp1(d, part, c);
  const Eigen::MatrixXd complete_rows = d.values(part.rows[0], Eigen::all);
  const Eigen::MatrixXd k = build_kernel_matrix(complete_rows, c.network).entries;
  for (std::size_t q = 1; q < part.k(); ++q) {
    const auto& obs = part.obs_cols[q];
    const auto& mis = part.mis_cols[q];
    const Eigen::MatrixXd inv = k(obs, obs).inverse();
    const Eigen::MatrixXd map = k(mis, obs) * inv;
    const Eigen::MatrixXd cov = k(mis, mis) - map * k(obs, mis);
    const auto blocks = partition_sigma(k, obs, mis);
    ASSERT_EQ(blocks.jitter_used, 0.0);
    const auto cg = conditional_gaussian(blocks);
    EXPECT_LE((cg.mean_map - map).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((cg.cov - cov).cwiseAbs().maxCoeff(), 1e-8);
    const MvnSampler sampler(cg.cov, 1e-4, cg.prior_scale);
    for (Index i : part.rows[q]) {
      const Eigen::VectorXd mean = map * d.values(i, obs).transpose();
      for (std::uint64_t m = 0; m < 3; ++m) {
        RngStream rng(c.seed, StreamKey{StreamPurpose::PosteriorDraw, m, q, 0, static_cast<std::uint64_t>(i)});
        const Eigen::VectorXd expected = sampler.draw(mean, rng);
        const Eigen::VectorXd got = set.imputations[m](i, mis).transpose();
        EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-8);
      }
    }
  }
}

TEST(MiNngp1, PreconditionErrors) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(4, 3);
  Dataset d = Dataset::complete(v);
  for (Index i = 0; i < 4; ++i) d.mask(i, i % 3) = false;
  const auto part = detect_patterns(d);
  try {
    mi_nngp1(d, part, cfg(2));
    FAIL();
  } catch (const unsupported_input_error& e) {
    EXPECT_EQ(e.exit_code(), 4);
    EXPECT_NE(std::string(e.what()).find("mi-nngp2"), std::string::npos);
  }
  EXPECT_THROW(mi_nngp1_bootstrap(d, part, cfg(2)), unsupported_input_error);
  ImputationConfig bs = cfg(2);
  bs.bootstrap = true;
  EXPECT_THROW(mi_nngp1(toy(1), detect_patterns(toy(1)), bs), validation_error);
  ImputationConfig bad = cfg(0);
  EXPECT_THROW(impute(toy(1), ImputationMethod::MiNngp1, bad), validation_error);
  // MI-NNGP2 falls back to column-mean initialization.
  const auto set = impute(d, ImputationMethod::MiNngp2, cfg(2));
  expect_valid(set, d, 2);
}

TEST(MiNngp1, AllMissingRowIsRejected) {
  Dataset d = toy(3, 12, 4);
  d.mask.row(11).setConstant(false);
  EXPECT_THROW(impute(d, ImputationMethod::MiNngp1, cfg(1)), unsupported_input_error);
}

TEST(Bootstrap, ForcedIdentityResampleMatchesMiNngp1) {
  const Dataset d = toy(8);
  const auto part = detect_patterns(d);
  const ImputationConfig c = cfg(3, 21);
  std::vector<IndexList> forced(3, part.rows[0]);
  const auto plain = mi_nngp1(d, part, c);
  const auto boot = mi_nngp1_bootstrap(d, part, c, &forced);
  EXPECT_TRUE(identical(plain.imputations, boot.imputations));
  const std::vector<IndexList> too_few(2, part.rows[0]);
  EXPECT_THROW(mi_nngp1_bootstrap(d, part, c, &too_few), validation_error);
}

TEST(Bootstrap, SingletonCompleteBlockEqualsMiNngp1) {
  Dataset d = toy(9, 10, 4);
  d.mask.setConstant(true);
  for (Index i = 1; i < 10; ++i) d.mask(i, 3) = false;
  const auto part = detect_patterns(d);
  ASSERT_EQ(part.rows[0].size(), 1u);
  const auto c = cfg(4, 3);
  EXPECT_TRUE(identical(mi_nngp1(d, part, c).imputations, mi_nngp1_bootstrap(d, part, c).imputations));
}

TEST(Bootstrap, ResamplesReproducibleAndDistinct) {
  const IndexList rows{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto a0 = bootstrap_rows(rows, 4, 0, 0), a1 = bootstrap_rows(rows, 4, 1, 0);
  EXPECT_EQ(a0, bootstrap_rows(rows, 4, 0, 0));
  EXPECT_NE(a0, a1);
  EXPECT_EQ(a0.size(), rows.size());
  for (Index r : a0) EXPECT_TRUE(r >= 0 && r < 10);
  EXPECT_LT(std::set<Index>(a0.begin(), a0.end()).size(), 10u);
}

TEST(Bootstrap, TwoStageTracksReproducibleAndDistinct) {
  const Dataset d = toy(10);
  const auto part = detect_patterns(d);
  const auto a = mi_nngp2_bootstrap(d, part, cfg(3, 5));
  const auto b = mi_nngp2_bootstrap(d, part, cfg(3, 5));
  EXPECT_TRUE(identical(a.imputations, b.imputations));
  EXPECT_FALSE((a.imputations[0].array() == a.imputations[1].array()).all());
  expect_valid(a, d, 3);
  EXPECT_EQ(a.diagnostics.jitter_events.size(), 3u);
}

TEST(MiNngp2, SnapshotCountAndInitialChecks) {
  const Dataset d = toy(11);
  const auto part = detect_patterns(d);
  const Eigen::MatrixXd init = column_mean_impute(d);
  for (int n : {0, 1, 3})
    for (int t : {1, 2}) {
      ImputationConfig c = cfg(3);
      c.burn_in = n;
      c.thinning = t;
      const auto set = mi_nngp2(d, part, init, c);
      expect_valid(set, d, 3);
      EXPECT_EQ(set.diagnostics.jitter_events.size(), 3u);
    }
  Eigen::MatrixXd wrong = init;
  wrong(0, 0) += 1.0;
  EXPECT_THROW(mi_nngp2(d, part, wrong, cfg(2)), validation_error);
  EXPECT_THROW(mi_nngp2(d, part, Eigen::MatrixXd::Zero(3, 3), cfg(2)), validation_error);
}

TEST(MiNngp2, FullyObservedReturnsInitial) {
  const Dataset d = Dataset::complete(Eigen::MatrixXd::Random(5, 3));
  const auto set = mi_nngp2(d, detect_patterns(d), d.values, cfg(4));
  ASSERT_EQ(set.imputations.size(), 4u);
  for (const auto& x : set.imputations) EXPECT_TRUE((x.array() == d.values.array()).all());
}

TEST(MiNngp2, SingleCycleIsOneDrawWithComplementInputRows) {
  Dataset d = toy(12, 16, 5);
  d.mask.setConstant(true);
  for (Index i = 10; i < 16; ++i) d.mask(i, 4) = d.mask(i, 2) = false;
  const auto part = detect_patterns(d);
  ASSERT_EQ(part.k(), 2u);
  ImputationConfig c = cfg(1, 31);
  c.burn_in = 0;
  const Eigen::MatrixXd init = column_mean_impute(d);
  const auto set = mi_nngp2(d, part, init, c);

  const IndexList is = part.complement_rows(1);
  const Eigen::MatrixXd k = build_kernel_matrix(init(is, Eigen::all), c.network).entries;
  const auto cg = conditional_gaussian(partition_sigma(k, part.obs_cols[1], part.mis_cols[1]));
  const MvnSampler sampler(cg.cov, 1e-4, cg.prior_scale);
  for (Index i : part.rows[1]) {
    RngStream rng(c.seed, StreamKey{StreamPurpose::PosteriorDraw, 0, 1, 1, static_cast<std::uint64_t>(i)});
    const Eigen::VectorXd expected = sampler.draw(cg.mean_map * init(i, part.obs_cols[1]).transpose(), rng);
    EXPECT_LE((set.imputations[0](i, part.mis_cols[1]).transpose() - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MiNngp2, TimeComparableToMiNngp1) {
  SynthConfig sc = *preset("p250-gaussian-mar");
  sc.seed = 3;
  const Dataset d = generate_scenario(sc).dataset;
  const auto part = detect_patterns(d);
  ImputationConfig c1 = cfg(3), c2 = cfg(3);
  c2.burn_in = 2;
  const Eigen::MatrixXd init = mi_nngp1(d, part, cfg(1)).imputations.front();
  auto best_of = [](auto&& fn) {
    double best = 1e300;
    for (int r = 0; r < 3; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  const double t1 = best_of([&] { mi_nngp1(d, part, c1); });
  const double t2 = best_of([&] { mi_nngp2(d, part, init, c2); });
  EXPECT_LE(t2, 12.0 * t1) << "mi_nngp2 " << t2 << "s, mi_nngp1 " << t1 << "s";
}

TEST(Baselines, ColumnMean) {
  Eigen::MatrixXd v(3, 2);
  v << 1, 4, kMissing, 4, 3, kMissing;
  const auto out = column_mean_impute(Dataset::from_values(v));
  EXPECT_EQ(out(1, 0), 2.0);
  EXPECT_EQ(out(2, 1), 4.0);
  const Dataset full = Dataset::complete(Eigen::MatrixXd::Random(3, 3));
  EXPECT_TRUE((column_mean_impute(full).array() == full.values.array()).all());
  Eigen::MatrixXd empty_col = v;
  empty_col.col(1).setConstant(kMissing);
  EXPECT_THROW(column_mean_impute(Dataset::from_values(empty_col)), validation_error);
}

TEST(Baselines, CompleteCaseFilter) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Ones(8, 5);
  v(2, 3) = v(3, 4) = v(4, 1) = v(5, 4) = v(6, 0) = v(7, 1) = kMissing;
  const auto cc = complete_case_filter(Dataset::from_values(v));
  EXPECT_EQ(cc.rows, (IndexList{0, 1}));
  EXPECT_EQ(cc.data.rows(), 2);
  EXPECT_FALSE(cc.empty);
  const auto full = complete_case_filter(Dataset::complete(v.topRows(2)));
  EXPECT_EQ(full.rows.size(), 2u);
  Eigen::MatrixXd none = Eigen::MatrixXd::Ones(3, 3);
  none.diagonal().setConstant(kMissing);
  const auto nothing = complete_case_filter(Dataset::from_values(none));
  EXPECT_TRUE(nothing.empty);
  EXPECT_EQ(nothing.data.rows(), 0);
}

TEST(Imputers, MethodNames) {
  for (auto m : kAll) EXPECT_EQ(imputation_method_from_string(to_string(m)), m);
  EXPECT_THROW(imputation_method_from_string("mice"), validation_error);
}
