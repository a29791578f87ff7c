#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "fm/error.hpp"
#include "fm/sae.hpp"
#include "fm/toy_encoder.hpp"

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fm_sae_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// Central differences over every parameter of the model.
double max_relative_gradient_error(fm::SparseAutoencoder sae, const Eigen::MatrixXd& x,
                                   double lambda) {
  fm::SaeGradients g;
  fm::sae_loss_and_gradients(sae, x, lambda, g);
  const double h = 1e-6;
  double worst = 0.0;
  auto check = [&](auto& param, const auto& grad) {
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      const double keep = param.data()[i];
      param.data()[i] = keep + h;
      const double up = fm::sae_loss(sae, x, lambda).total;
      param.data()[i] = keep - h;
      const double down = fm::sae_loss(sae, x, lambda).total;
      param.data()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grad.data()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  };
  check(sae.w_enc, g.w_enc);
  check(sae.b_enc, g.b_enc);
  check(sae.w_dec, g.w_dec);
  check(sae.b_dec, g.b_dec);
  return worst;
}

}  // namespace

TEST(Sae, LatentWidth) {
  EXPECT_EQ(fm::latent_width_for(1536), 192);
  EXPECT_EQ(fm::latent_width_for(200000), 16384);
  EXPECT_EQ(fm::latent_width_for(8), 1);
  EXPECT_EQ(fm::latent_width_for(15), 1);
  EXPECT_THROW(fm::latent_width_for(7), fm::ArgumentError);
}

TEST(Sae, HandEncode) {
  fm::SparseAutoencoder sae;
  sae.w_enc.resize(2, 3);
  sae.w_enc << 1, 2, -1, 0.5, -1, 3;
  sae.b_enc = Eigen::Vector2d(0.1, -0.2);
  sae.w_dec = Eigen::MatrixXd::Zero(3, 2);
  sae.b_dec = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd h = sae.encode(Eigen::Vector3d(2, -1, 0.5));
  EXPECT_NEAR(h(0), -0.4, 1e-15);
  EXPECT_NEAR(h(1), 3.3, 1e-15);

  sae.activation = fm::EncoderActivation::relu;
  const Eigen::VectorXd r = sae.encode(Eigen::Vector3d(2, -1, 0.5));
  EXPECT_EQ(r(0), 0.0);
  EXPECT_NEAR(r(1), 3.3, 1e-15);
}

TEST(Sae, HandLoss) {
  fm::SparseAutoencoder sae;
  sae.w_enc = Eigen::RowVector2d(0.5, -1);
  sae.b_enc = Eigen::VectorXd::Constant(1, 0.25);
  sae.w_dec = Eigen::Vector2d(2, -1);
  sae.b_dec = Eigen::Vector2d(0.1, 0.2);
  const Eigen::MatrixXd x = Eigen::RowVector2d(1, 2);
  const auto t = fm::sae_loss(sae, x, 0.1);
  EXPECT_NEAR(t.recon, 11.8625, 1e-12);
  EXPECT_NEAR(t.penalty, 0.125, 1e-12);
  EXPECT_NEAR(t.total, 11.9875, 1e-12);
}

TEST(Sae, GradientCheck) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 10; ++trial) {
    const int D = 2 + trial % 7, d = 1 + trial % 4;
    fm::SparseAutoencoder sae;
    sae.w_enc = Eigen::MatrixXd::NullaryExpr(d, D, [&] { return n01(rng); });
    sae.b_enc = Eigen::VectorXd::NullaryExpr(d, [&] { return n01(rng); });
    sae.w_dec = Eigen::MatrixXd::NullaryExpr(D, d, [&] { return n01(rng); });
    sae.b_dec = Eigen::VectorXd::NullaryExpr(D, [&] { return n01(rng); });
    const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(5, D, [&] { return n01(rng); });
    EXPECT_LT(max_relative_gradient_error(sae, x, 1e-3), 1e-5) << "trial " << trial;
    EXPECT_LT(max_relative_gradient_error(sae, x, 0.5), 1e-5) << "trial " << trial;
  }
}

TEST(Sae, GradientCheckRelu) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(4, 8, [&] { return n01(rng); });
  auto sae = fm::init_sae(8, 9, fm::EncoderActivation::relu);
  sae.b_enc.setConstant(0.3);  // keep pre-activations away from the kink
  const Eigen::MatrixXd pre = (x * sae.w_enc.transpose()).rowwise() + sae.b_enc.transpose();
  ASSERT_GT(pre.cwiseAbs().minCoeff(), 1e-4);
  EXPECT_LT(max_relative_gradient_error(sae, x, 1e-2), 1e-5);
}

TEST(Sae, InitShapesAndRanges) {
  const auto sae = fm::init_sae(64, 5);
  EXPECT_EQ(sae.latent_dim(), 8);
  EXPECT_EQ(sae.input_dim(), 64);
  EXPECT_LE(sae.w_enc.cwiseAbs().maxCoeff(), 1.0 / 8.0);
  EXPECT_LE(sae.w_dec.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(8.0));
  EXPECT_EQ(sae.b_enc.cwiseAbs().sum(), 0.0);
  EXPECT_EQ(sae.b_dec.cwiseAbs().sum(), 0.0);
  const auto again = fm::init_sae(64, 5);
  EXPECT_EQ(sae.w_enc, again.w_enc);
}

TEST(EarlyStopping, PlateauFromEpochTwoStopsAtFive) {
  EXPECT_EQ(fm::epochs_until_stop({1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, 3, 10), 5);
  EXPECT_EQ(fm::epochs_until_stop({1.0, 0.5, 0.6, 0.7, 0.8, 0.9}, 3, 10), 5);
  EXPECT_EQ(fm::epochs_until_stop({1.0, 0.9, 0.8, 0.7}, 3, 10), 4);
  EXPECT_EQ(fm::epochs_until_stop({1.0, 0.9, 0.8, 0.7, 0.6}, 3, 3), 3);
}

TEST(EarlyStopping, TracksBestEpoch) {
  fm::EarlyStopping stop(2);
  EXPECT_FALSE(stop.update(3.0));
  EXPECT_FALSE(stop.update(2.0));
  EXPECT_FALSE(stop.update(2.5));
  EXPECT_FALSE(stop.update(1.0));
  EXPECT_FALSE(stop.update(1.0));
  EXPECT_TRUE(stop.update(1.5));
  EXPECT_EQ(stop.best_epoch(), 4);
}

TEST(EarlyStopping, InitialBestCounts) {
  fm::EarlyStopping stop(3, 0.1, true);
  EXPECT_FALSE(stop.update(0.2));
  EXPECT_FALSE(stop.update(0.2));
  EXPECT_TRUE(stop.update(0.2));
  EXPECT_EQ(stop.best_epoch(), 0);
}

TEST(Sae, TrainingMakesProgressAndIsDeterministic) {
  const auto codes = fm::generate_synthetic_codes(400, 64, 8, 2, 11);
  fm::TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.max_epochs = 5;
  cfg.seed = 2;
  const auto a = fm::train_sae(fm::init_sae(64, 1), codes.data, cfg);
  const auto b = fm::train_sae(fm::init_sae(64, 1), codes.data, cfg);
  ASSERT_FALSE(a.trace.epochs.empty());
  EXPECT_LT(a.trace.epochs.back().total_loss, a.trace.initial_total_loss);
  EXPECT_EQ(a.sae.w_enc, b.sae.w_enc);
  EXPECT_EQ(a.sae.w_dec, b.sae.w_dec);
  EXPECT_EQ(a.val_rows, b.val_rows);
  EXPECT_EQ(a.val_rows.size(), 40u);
  EXPECT_EQ(a.train_rows.size(), 360u);
  EXPECT_LE(static_cast<int>(a.trace.epochs.size()), cfg.max_epochs);
}

TEST(Sae, TrainingRejectsBadInput) {
  fm::TrainConfig cfg;
  EXPECT_THROW(fm::train_sae(fm::init_sae(16, 1), Eigen::MatrixXd::Ones(9, 16), cfg),
               fm::DataError);
  EXPECT_THROW(fm::train_sae(fm::init_sae(16, 1), Eigen::MatrixXd::Ones(20, 24), cfg),
               fm::ArgumentError);
  cfg.lr = 0.0;
  EXPECT_THROW(fm::validate(cfg), fm::ConfigError);
  cfg = {};
  cfg.val_fraction = 1.0;
  EXPECT_THROW(fm::validate(cfg), fm::ConfigError);
}

TEST(SaeMetrics, OracleCodes) {
  const auto codes = fm::generate_synthetic_codes(500, 256, 32, 4, 5);
  EXPECT_EQ(fm::active_feature_count(codes.coefficients, 1e-4), 32);
  const auto act = fm::per_sample_activity(codes.coefficients, 1e-4);
  EXPECT_DOUBLE_EQ(act.mean_activity_ratio, 0.125);
  EXPECT_DOUBLE_EQ(act.mean_sparsity, 0.875);
  const Eigen::VectorXd f = fm::activation_frequency(codes.coefficients, 1e-4);
  EXPECT_NEAR(f.sum(), 4.0, 1e-12);
  EXPECT_GE(f.minCoeff(), 0.0);
  EXPECT_LE(f.maxCoeff(), 1.0);
}

TEST(SaeMetrics, ThresholdIsStrict) {
  Eigen::MatrixXd h(2, 3);
  h << 1e-4, -2e-4, 0, 0, 0, 5;
  EXPECT_EQ(fm::active_feature_count(h, 1e-4), 2);
  const auto act = fm::per_sample_activity(h, 1e-4);
  EXPECT_NEAR(act.activity_ratio(0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(act.activity_ratio(1), 1.0 / 3.0, 1e-15);
}

TEST(SaeMetrics, ReconstructionError) {
  fm::SparseAutoencoder sae = fm::init_sae(8, 1);
  sae.w_enc.setZero();
  sae.w_dec.setZero();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 8);
  EXPECT_DOUBLE_EQ(fm::relative_reconstruction_error(sae, x), 1.0);
  sae.b_dec.setOnes();
  EXPECT_DOUBLE_EQ(fm::relative_reconstruction_error(sae, x), 0.0);
}

TEST(SaeCheckpoint, RoundTrip) {
  const auto dir = scratch("roundtrip");
  auto sae = fm::init_sae(32, 4, fm::EncoderActivation::relu);
  sae.b_enc.setConstant(0.25);
  sae.b_dec.setConstant(-0.5);
  fm::save_sae(dir, sae, {});
  for (auto f : {"w_enc.npy", "w_dec.npy", "b_enc.npy", "b_dec.npy", "sae.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto back = fm::load_sae(dir);
  EXPECT_EQ(back.activation, fm::EncoderActivation::relu);
  EXPECT_EQ(back.latent_dim(), 4);
  // float32 on disk
  EXPECT_LT((back.w_enc - sae.w_enc).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_LT((back.w_dec - sae.w_dec).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_EQ(back.b_enc, sae.b_enc);
  EXPECT_EQ(back.b_dec, sae.b_dec);
  std::filesystem::remove_all(dir);
}

TEST(SaeCheckpoint, MissingFilesFail) {
  const auto dir = scratch("missing");
  std::filesystem::create_directories(dir);
  EXPECT_THROW(fm::load_sae(dir), fm::Error);
  std::filesystem::remove_all(dir);
}
