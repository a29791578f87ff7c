#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "fm/error.hpp"
#include "fm/manifold.hpp"

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n01;
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return n01(rng); });
}

// Textbook two-pass Pearson, written without Eigen reductions.
double pearson(const Eigen::MatrixXd& x, int col, const Eigen::VectorXd& p) {
  const int n = static_cast<int>(x.rows());
  double mx = 0, mp = 0;
  for (int i = 0; i < n; ++i) {
    mx += x(i, col);
    mp += p(i);
  }
  mx /= n;
  mp /= n;
  double sxy = 0, sxx = 0, spp = 0;
  for (int i = 0; i < n; ++i) {
    sxy += (x(i, col) - mx) * (p(i) - mp);
    sxx += (x(i, col) - mx) * (x(i, col) - mx);
    spp += (p(i) - mp) * (p(i) - mp);
  }
  return sxy / std::sqrt(sxx * spp);
}

int scan_dimension(std::vector<double> eig, double tau) {
  double total = 0;
  for (double e : eig) total += e;
  double cum = 0;
  for (std::size_t k = 0; k < eig.size(); ++k) {
    cum += eig[k];
    if (cum >= tau * total) return static_cast<int>(k) + 1;
  }
  return static_cast<int>(eig.size());
}

fm::SampleManifest sweep_manifest(const std::vector<double>& levels, int per_level,
                                  fm::ArtifactKind kind = fm::ArtifactKind::blur) {
  fm::SampleManifest m;
  m.layer_id = "L1";
  m.severity_grid = levels;
  for (std::size_t t = 0; t < levels.size(); ++t)
    for (int i = 0; i < per_level; ++i)
      m.records.push_back({"s" + std::to_string(t) + "_" + std::to_string(i),
                           fm::Authenticity::real, kind, levels[t],
                           "img" + std::to_string(i)});
  return m;
}

}  // namespace

TEST(Pca, CollinearPoints) {
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 1, 1, 2, 2;
  const Eigen::VectorXd e = fm::pca_eigenvalues(x);
  ASSERT_EQ(e.size(), 2);
  EXPECT_NEAR(e(0), 2.0, 1e-12);
  EXPECT_NEAR(e(1), 0.0, 1e-12);
  EXPECT_EQ(fm::intrinsic_dimension(e), 1);
}

TEST(Pca, LengthIsMinOfRankBound) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(fm::pca_eigenvalues(random_matrix(rng, 8, 50)).size(), 7);
  EXPECT_EQ(fm::pca_eigenvalues(random_matrix(rng, 50, 6)).size(), 6);
  EXPECT_THROW(fm::pca_eigenvalues(random_matrix(rng, 1, 6)), fm::ArgumentError);
}

TEST(Pca, TraceIdentity) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = random_matrix(rng, 30, 9) * 3.0;
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    const double var = c.squaredNorm() / (x.rows() - 1);
    EXPECT_NEAR(fm::pca_eigenvalues(x).sum() / var, 1.0, 1e-9);
  }
}

TEST(Pca, RotationInvariance) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd x = random_matrix(rng, 25, 6);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, 6, 6))
                                .householderQ();
  const Eigen::VectorXd a = fm::pca_eigenvalues(x);
  const Eigen::VectorXd b = fm::pca_eigenvalues(x * q);
  for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_NEAR(b(i) / a(i), 1.0, 1e-9);
}

TEST(IntrinsicDimension, Examples) {
  EXPECT_EQ(fm::intrinsic_dimension(Eigen::Vector2d(2, 0), 0.95), 1);
  EXPECT_EQ(fm::intrinsic_dimension(Eigen::VectorXd::Ones(20), 0.95), 19);
  EXPECT_EQ(fm::intrinsic_dimension(Eigen::VectorXd::Ones(20), 1.0), 20);
  EXPECT_THROW(fm::intrinsic_dimension(Eigen::VectorXd::Zero(4)), fm::DegenerateError);
  EXPECT_THROW(fm::intrinsic_dimension(Eigen::Vector2d(1, 2)), fm::ArgumentError);
  EXPECT_THROW(fm::intrinsic_dimension(Eigen::Vector2d(1, -1)), fm::ArgumentError);
  EXPECT_THROW(fm::intrinsic_dimension(Eigen::Vector2d(1, 0), 0.0), fm::ArgumentError);
}

TEST(IntrinsicDimension, MatchesScanOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd e = fm::pca_eigenvalues(random_matrix(rng, 20, 8));
    const std::vector<double> eig(e.data(), e.data() + e.size());
    for (double tau : {0.5, 0.8, 0.95})
      EXPECT_EQ(fm::intrinsic_dimension(e, tau), scan_dimension(eig, tau));
  }
}

TEST(IntrinsicDimension, NonDecreasingInTau) {
  std::mt19937_64 rng(5);
  const Eigen::VectorXd e = fm::pca_eigenvalues(random_matrix(rng, 20, 8));
  int prev = 0;
  for (double tau = 0.05; tau <= 1.0; tau += 0.05) {
    const int k = fm::intrinsic_dimension(e, tau);
    EXPECT_GE(k, prev);
    prev = k;
  }
}

TEST(Curvature, Examples) {
  Eigen::MatrixXd line(5, 3);
  for (int t = 0; t < 5; ++t) line.row(t) = Eigen::RowVector3d(1, -2, 0.5) * t;
  EXPECT_LE(fm::curvature(line), 1e-12);

  Eigen::MatrixXd corner(3, 2);
  corner << 0, 0, 1, 0, 1, 1;
  EXPECT_NEAR(fm::curvature(corner), std::sqrt(2.0), 1e-12);
  EXPECT_THROW(fm::curvature(corner.topRows(2)), fm::ArgumentError);
}

TEST(Curvature, HomogeneousAndTranslationInvariant) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = random_matrix(rng, 8, 5);
    const double c = fm::curvature(x);
    EXPECT_NEAR(fm::curvature(-2.5 * x) / (2.5 * c), 1.0, 1e-9);
    const Eigen::MatrixXd shifted = x.rowwise() + random_matrix(rng, 1, 5).row(0);
    EXPECT_NEAR(fm::curvature(shifted) / c, 1.0, 1e-9);
  }
}

TEST(Selectivity, MatchesPearsonOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd x = random_matrix(rng, 50, 6);
    const Eigen::VectorXd p = random_matrix(rng, 50, 1).col(0);
    const auto s = fm::selectivity(x, p);
    double mean_abs = 0;
    for (int j = 0; j < 6; ++j) {
      EXPECT_NEAR(s.rho(j), pearson(x, j, p), 1e-12);
      mean_abs += std::abs(pearson(x, j, p)) / 6;
    }
    EXPECT_NEAR(s.score, mean_abs, 1e-12);
  }
}

TEST(Selectivity, Conventions) {
  Eigen::VectorXd p(4);
  p << 0, 0.1, 0.2, 0.3;
  Eigen::MatrixXd x(4, 3);
  x.col(0) = p;
  x.col(1).setConstant(5);
  x.col(2) = -3 * p;
  const auto s = fm::selectivity(x, p);
  EXPECT_DOUBLE_EQ(s.rho(0), 1.0);
  EXPECT_EQ(s.rho(1), 0.0);
  EXPECT_DOUBLE_EQ(s.rho(2), -1.0);
  EXPECT_NEAR(s.score, 2.0 / 3.0, 1e-15);
  EXPECT_THROW(fm::selectivity(x, Eigen::VectorXd::Constant(4, 0.2)), fm::ArgumentError);
  EXPECT_THROW(fm::selectivity(x.topRows(2), p.head(2)), fm::ArgumentError);
  EXPECT_THROW(fm::selectivity(x, p.head(3)), fm::ArgumentError);
}

TEST(Selectivity, AffineAndSignProperties) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd x = random_matrix(rng, 50, 6);
  const Eigen::VectorXd p = random_matrix(rng, 50, 1).col(0);
  const auto base = fm::selectivity(x, p);
  Eigen::MatrixXd y = x;
  y.col(0) = 4.0 * x.col(0).array() + 7.0;
  y.col(1) = -x.col(1);
  y.col(2) = -0.5 * x.col(2).array() + 1.0;
  const auto s = fm::selectivity(y, p);
  EXPECT_NEAR(s.rho(0), base.rho(0), 1e-12);
  EXPECT_EQ(s.rho(1), -base.rho(1));
  EXPECT_NEAR(s.rho(2), -base.rho(2), 1e-12);
  EXPECT_NEAR(s.score, base.score, 1e-12);
}

TEST(BuildSweep, AveragesLevels) {
  const std::vector<double> levels = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  const auto m = sweep_manifest(levels, 10);
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd acts = random_matrix(rng, 80, 4);
  const auto sweep = fm::build_sweep(acts, m, fm::ArtifactKind::blur);
  ASSERT_EQ(sweep.means.rows(), 8);
  EXPECT_EQ(sweep.levels, levels);
  for (int t = 0; t < 8; ++t) {
    EXPECT_EQ(sweep.level_counts[t], 10);
    const Eigen::RowVectorXd expect = acts.middleRows(10 * t, 10).colwise().mean();
    EXPECT_LT((sweep.means.row(t) - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(sweep.samples.rows(), 80);
}

TEST(BuildSweep, SingleImagePerLevelAndOrdering) {
  auto m = sweep_manifest({0.0, 0.35, 0.7}, 1);
  std::swap(m.records[0], m.records[2]);
  Eigen::MatrixXd acts(3, 2);
  acts << 7, 7, 3, 3, 0, 0;
  const auto sweep = fm::build_sweep(acts, m, fm::ArtifactKind::blur);
  EXPECT_EQ(sweep.levels, (std::vector<double>{0.0, 0.35, 0.7}));
  EXPECT_EQ(sweep.means(0, 0), 0.0);
  EXPECT_EQ(sweep.means(1, 0), 3.0);
  EXPECT_EQ(sweep.means(2, 0), 7.0);
}

TEST(BuildSweep, Errors) {
  const auto two = sweep_manifest({0.0, 0.5}, 2);
  EXPECT_THROW(fm::build_sweep(Eigen::MatrixXd::Zero(4, 2), two, fm::ArtifactKind::blur),
               fm::DataError);
  auto uneven = sweep_manifest({0.0, 0.3, 0.6}, 2);
  uneven.records.pop_back();
  EXPECT_THROW(fm::build_sweep(Eigen::MatrixXd::Zero(5, 2), uneven, fm::ArtifactKind::blur),
               fm::DataError);
  const auto ok = sweep_manifest({0.0, 0.3, 0.6}, 2);
  EXPECT_THROW(fm::build_sweep(Eigen::MatrixXd::Zero(6, 2), ok, fm::ArtifactKind::warp),
               fm::DataError);
  EXPECT_THROW(fm::build_sweep(Eigen::MatrixXd::Zero(5, 2), ok, fm::ArtifactKind::blur),
               fm::ValidationError);
}

TEST(ManifoldReport, AffineSweep) {
  const std::vector<double> levels = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  const auto m = sweep_manifest(levels, 3);
  const Eigen::RowVectorXd a = Eigen::RowVector4d(1, -2, 0.5, 3);
  const Eigen::RowVectorXd b = Eigen::RowVector4d(0.1, 0.2, 0.3, 0.4);
  Eigen::MatrixXd acts(24, 4);
  for (int r = 0; r < 24; ++r) acts.row(r) = b + levels[r / 3] * a;
  const auto rep = fm::manifold_report(fm::build_sweep(acts, m, fm::ArtifactKind::blur));
  EXPECT_EQ(rep.intrinsic_dim, 1);
  EXPECT_LE(rep.curvature, 1e-12);
  EXPECT_NEAR(rep.selectivity, 1.0, 1e-12);
  EXPECT_EQ(rep.eigenvalues.size(), 4);
  const auto raw = fm::manifold_report(fm::build_sweep(acts, m, fm::ArtifactKind::blur), 0.95,
                                       fm::DimensionSource::raw_samples);
  EXPECT_EQ(raw.intrinsic_dim, 1);
}

TEST(Summaries, HistogramAndCdf) {
  Eigen::VectorXd v(5);
  v << -1, 0, 0.25, 0.5, 2;
  EXPECT_EQ(fm::histogram(v, 4, 0, 1), (std::vector<int>{2, 1, 1, 1}));
  const auto cdf = fm::empirical_cdf(v);
  ASSERT_EQ(cdf.size(), 5u);
  EXPECT_EQ(cdf.front().first, -1);
  EXPECT_EQ(cdf.back().second, 1.0);
  EXPECT_THROW(fm::histogram(v, 0, 0, 1), fm::ArgumentError);
}
