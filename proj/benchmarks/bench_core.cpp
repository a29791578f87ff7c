#include <random>

#include <benchmark/benchmark.h>

#include "fm/artifact_forge.hpp"
#include "fm/manifold.hpp"
#include "fm/sae.hpp"
#include "fm/synthetic_faces.hpp"
#include "fm/toy_encoder.hpp"

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return n01(rng); });
}

void BM_SaeLossAndGradients(benchmark::State& state) {
  const int D = static_cast<int>(state.range(0));
  const auto sae = fm::init_sae(D, 1);
  const Eigen::MatrixXd batch = random_matrix(64, D, 2);
  fm::SaeGradients g;
  for (auto _ : state) benchmark::DoNotOptimize(fm::sae_loss_and_gradients(sae, batch, 1e-3, g));
  state.SetItemsProcessed(state.iterations() * batch.rows());
}
BENCHMARK(BM_SaeLossAndGradients)->Arg(256)->Arg(1024)->Arg(2048);

void BM_PcaEigenvalues(benchmark::State& state) {
  const Eigen::MatrixXd x = random_matrix(static_cast<int>(state.range(0)), 256, 3);
  for (auto _ : state) benchmark::DoNotOptimize(fm::pca_eigenvalues(x));
}
BENCHMARK(BM_PcaEigenvalues)->Arg(8)->Arg(80)->Arg(500);

void BM_Selectivity(benchmark::State& state) {
  const Eigen::MatrixXd x = random_matrix(80, 2048, 4);
  const Eigen::VectorXd p = random_matrix(80, 1, 5).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(fm::selectivity(x, p));
}
BENCHMARK(BM_Selectivity);

void BM_ApplyArtifact(benchmark::State& state) {
  const auto kind = fm::kArtifactKinds[state.range(0)];
  const auto img = fm::synthesize_face({1, 224, 224, 0.3});
  const auto mask = fm::default_face_mask(224, 224);
  for (auto _ : state) benchmark::DoNotOptimize(fm::apply_artifact(img, kind, 0.7, mask, 9));
  state.SetLabel(std::string(fm::to_string(kind)));
}
BENCHMARK(BM_ApplyArtifact)->DenseRange(0, 3);

void BM_ToyEncode(benchmark::State& state) {
  const fm::ToyEncoder enc;
  const auto img = fm::synthesize_face({2, 224, 224, 0.5});
  for (auto _ : state) benchmark::DoNotOptimize(enc.encode(img));
}
BENCHMARK(BM_ToyEncode);

}  // namespace
BENCHMARK_MAIN();
