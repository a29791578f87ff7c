#pragma once

// Geometry of the feature trajectory traced out as an artifact's severity
// increases: PCA intrinsic dimension, discrete curvature and Pearson
// selectivity. Everything runs in double precision.

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fm/activation_store.hpp"

namespace fm {

inline constexpr double kDefaultVarianceThreshold = 0.95;

// Eigenvalues of the sample covariance (column-centred, divisor n - 1),
// obtained from the singular values of the centred matrix. Sorted
// descending, length min(n - 1, m). Throws ArgumentError for n < 2.
Eigen::VectorXd pca_eigenvalues(const Eigen::MatrixXd& x);

// Smallest k whose leading eigenvalues explain at least `tau` of the total.
// Throws DegenerateError when every eigenvalue is zero.
int intrinsic_dimension(const Eigen::VectorXd& eigenvalues,
                        double tau = kDefaultVarianceThreshold);

// Mean norm of the T - 2 second differences of a trajectory given as T rows.
double curvature(const Eigen::MatrixXd& trajectory);

struct Selectivity {
  Eigen::VectorXd rho;  // per column Pearson correlation with p
  double score = 0.0;   // mean |rho|
};

// Zero-variance columns get rho = 0. Throws ArgumentError for n < 3 or a
// constant p.
Selectivity selectivity(const Eigen::MatrixXd& x, const Eigen::VectorXd& p);

struct SeveritySweep {
  std::string layer_id;
  ArtifactKind kind = ArtifactKind::blur;
  std::vector<double> levels;     // ascending
  std::vector<int> level_counts;
  Eigen::MatrixXd means;          // T x D, row t = mean features at levels[t]
  Eigen::MatrixXd samples;        // every contributing row
  Eigen::VectorXd severities;     // severity of each contributing row
};

// Groups the rows of `kind` by severity and averages each level. Requires at
// least 3 levels with equal image counts; throws DataError otherwise.
SeveritySweep build_sweep(const Eigen::MatrixXd& activations, const SampleManifest& manifest,
                          ArtifactKind kind);
SeveritySweep build_sweep(const ActivationSet& acts, const SampleManifest& manifest,
                          ArtifactKind kind);

enum class DimensionSource { trajectory, raw_samples };

struct ManifoldReport {
  std::string layer_id;
  ArtifactKind artifact_kind = ArtifactKind::blur;
  int intrinsic_dim = 1;
  double curvature = 0.0;
  double selectivity = 0.0;
  Eigen::VectorXd rho;
  double tau = kDefaultVarianceThreshold;
  Eigen::VectorXd eigenvalues;
};

// Intrinsic dimension over the level means (or every raw sample), curvature
// over the mean trajectory, selectivity over the raw samples.
ManifoldReport manifold_report(const SeveritySweep& sweep,
                               double tau = kDefaultVarianceThreshold,
                               DimensionSource source = DimensionSource::trajectory);

// Histogram over [lo, hi] with `bins` equal bins; values outside are clamped
// into the edge bins.
std::vector<int> histogram(const Eigen::VectorXd& values, int bins, double lo, double hi);

// Sorted values with their empirical CDF (i + 1) / n.
std::vector<std::pair<double, double>> empirical_cdf(const Eigen::VectorXd& values);

}  // namespace fm
