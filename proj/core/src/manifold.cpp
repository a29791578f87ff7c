#include "fm/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/SVD>

#include "fm/error.hpp"

namespace fm {

Eigen::VectorXd pca_eigenvalues(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  if (n < 2) throw ArgumentError("PCA needs at least 2 rows");
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::VectorXd& sv = svd.singularValues();
  const auto k = std::min<Eigen::Index>(n - 1, x.cols());
  Eigen::VectorXd eig(k);
  for (Eigen::Index i = 0; i < k; ++i)
    eig[i] = i < sv.size() ? sv[i] * sv[i] / static_cast<double>(n - 1) : 0.0;
  return eig;
}

int intrinsic_dimension(const Eigen::VectorXd& eig, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ArgumentError("tau must lie in (0,1]");
  if (eig.size() == 0) throw DegenerateError("no eigenvalues");
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (!(eig[i] >= 0.0)) throw ArgumentError("eigenvalues must be non-negative");
    if (i > 0 && eig[i] > eig[i - 1])
      throw ArgumentError("eigenvalues must be sorted non-increasing");
  }
  const double total = eig.sum();
  if (!(total > 0.0)) throw DegenerateError("all eigenvalues are zero");
  double cum = 0.0;
  for (Eigen::Index k = 0; k < eig.size(); ++k) {
    cum += eig[k];
    if (cum / total >= tau) return static_cast<int>(k + 1);
  }
  return static_cast<int>(eig.size());
}

double curvature(const Eigen::MatrixXd& traj) {
  const auto T = traj.rows();
  if (T < 3) throw ArgumentError("curvature needs at least 3 trajectory points");
  double sum = 0.0;
  for (Eigen::Index t = 0; t + 2 < T; ++t)
    sum += (traj.row(t + 2) - 2.0 * traj.row(t + 1) + traj.row(t)).norm();
  return sum / static_cast<double>(T - 2);
}

Selectivity selectivity(const Eigen::MatrixXd& x, const Eigen::VectorXd& p) {
  const auto n = x.rows();
  if (n < 3) throw ArgumentError("selectivity needs at least 3 samples");
  if (p.size() != n) throw ArgumentError("severity vector length does not match rows");
  if ((p.array() == p[0]).all()) throw ArgumentError("severity vector is constant");

  const Eigen::VectorXd pc = p.array() - p.mean();
  const double pnorm = std::sqrt(pc.squaredNorm());
  Selectivity s;
  s.rho = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto col = x.col(j);
    if ((col.array() == col[0]).all()) continue;
    const Eigen::VectorXd xc = col.array() - col.mean();
    const double denom = std::sqrt(xc.squaredNorm()) * pnorm;
    if (!(denom > 0.0)) continue;
    s.rho[j] = std::clamp(xc.dot(pc) / denom, -1.0, 1.0);
  }
  s.score = x.cols() > 0 ? s.rho.cwiseAbs().mean() : 0.0;
  return s;
}

SeveritySweep build_sweep(const Eigen::MatrixXd& acts, const SampleManifest& manifest,
                          ArtifactKind kind) {
  validate_manifest(manifest, acts.rows());
  std::map<double, std::vector<Eigen::Index>> by_level;
  for (std::size_t i = 0; i < manifest.records.size(); ++i)
    if (manifest.records[i].artifact_kind == kind)
      by_level[manifest.records[i].severity].push_back(static_cast<Eigen::Index>(i));
  if (by_level.size() < 3)
    throw DataError("sweep for '" + std::string(to_string(kind)) + "' has " +
                    std::to_string(by_level.size()) + " severity levels, need at least 3");
  const std::size_t per_level = by_level.begin()->second.size();
  for (const auto& [level, rows] : by_level)
    if (rows.size() != per_level)
      throw DataError("sweep for '" + std::string(to_string(kind)) +
                      "' has unequal image counts across levels");

  SeveritySweep sweep;
  sweep.layer_id = manifest.layer_id;
  sweep.kind = kind;
  const auto T = static_cast<Eigen::Index>(by_level.size());
  sweep.means = Eigen::MatrixXd::Zero(T, acts.cols());
  sweep.samples.resize(static_cast<Eigen::Index>(T * per_level), acts.cols());
  sweep.severities.resize(sweep.samples.rows());
  Eigen::Index t = 0, r = 0;
  for (const auto& [level, rows] : by_level) {
    sweep.levels.push_back(level);
    sweep.level_counts.push_back(static_cast<int>(rows.size()));
    for (auto idx : rows) {
      sweep.means.row(t) += acts.row(idx);
      sweep.samples.row(r) = acts.row(idx);
      sweep.severities[r] = level;
      ++r;
    }
    sweep.means.row(t) /= static_cast<double>(rows.size());
    ++t;
  }
  return sweep;
}

SeveritySweep build_sweep(const ActivationSet& acts, const SampleManifest& manifest,
                          ArtifactKind kind) {
  validate_consistency(acts, manifest);
  return build_sweep(acts.to_double(), manifest, kind);
}

ManifoldReport manifold_report(const SeveritySweep& sweep, double tau,
                               DimensionSource source) {
  if (sweep.means.cols() != sweep.samples.cols())
    throw ArgumentError("sweep means and samples disagree on feature width");
  ManifoldReport r;
  r.layer_id = sweep.layer_id;
  r.artifact_kind = sweep.kind;
  r.tau = tau;
  r.eigenvalues = pca_eigenvalues(source == DimensionSource::trajectory ? sweep.means
                                                                          : sweep.samples);
  r.intrinsic_dim = intrinsic_dimension(r.eigenvalues, tau);
  r.curvature = curvature(sweep.means);
  Selectivity s = selectivity(sweep.samples, sweep.severities);
  r.rho = std::move(s.rho);
  r.selectivity = s.score;
  return r;
}

std::vector<int> histogram(const Eigen::VectorXd& values, int bins, double lo, double hi) {
  if (bins < 1 || !(hi > lo)) throw ArgumentError("histogram needs bins >= 1 and hi > lo");
  std::vector<int> counts(bins, 0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const int b = static_cast<int>(std::floor((values[i] - lo) / (hi - lo) * bins));
    ++counts[std::clamp(b, 0, bins - 1)];
  }
  return counts;
}

std::vector<std::pair<double, double>> empirical_cdf(const Eigen::VectorXd& values) {
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.emplace_back(v[i], static_cast<double>(i + 1) / static_cast<double>(v.size()));
  return out;
}

}  // namespace fm
