#include <cmath>

#include <gtest/gtest.h>

#include "fm/error.hpp"
#include "fm/interventions.hpp"
#include "fm/synthetic_faces.hpp"
#include "fm/toy_encoder.hpp"

namespace {

using fm::Authenticity;

std::vector<fm::Image> faces(int n) {
  std::vector<fm::Image> out;
  for (int i = 0; i < n; ++i)
    out.push_back(fm::synthesize_face({static_cast<std::uint64_t>(100 + i), 224, 224,
                                       i % 2 ? 0.8 : 0.0}));
  return out;
}

std::vector<Authenticity> alternating(int n) {
  std::vector<Authenticity> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % 2 ? Authenticity::fake : Authenticity::real);
  return labels;
}

}  // namespace

TEST(Importance, FinalBlockDominates) {
  const fm::ToyEncoder enc;
  const auto table = fm::importance_table(enc, faces(6));
  ASSERT_EQ(table.size(), 15u);
  double last = 0, earlier = 0;
  for (const auto& s : table) {
    EXPECT_GE(s.score, 0.0);
    EXPECT_TRUE(std::isfinite(s.score));
    (s.block == 4 ? last : earlier) = std::max(s.block == 4 ? last : earlier, s.score);
  }
  EXPECT_GE(last, earlier);
  EXPECT_EQ(table.front().block, 0);
  EXPECT_EQ(table.back().block, 4);
}

TEST(Importance, DisconnectedBlocksScoreZero) {
  fm::ToyEncoderConfig cfg;
  cfg.carry_gain = 0.0;
  const fm::ToyEncoder enc(cfg);
  const auto imgs = faces(3);
  for (int block = 0; block < 4; ++block)
    for (auto sub : fm::kSublayers)
      EXPECT_EQ(fm::layer_importance(enc, imgs, block, sub).score, 0.0) << block;
  EXPECT_GT(fm::layer_importance(enc, imgs, 4, fm::Sublayer::mlp).score, 0.0);
}

TEST(Importance, MeanAblationAndErrors) {
  const fm::ToyEncoder enc;
  const auto imgs = faces(4);
  const auto zero = fm::layer_importance(enc, imgs, 4, fm::Sublayer::mlp);
  const auto mean = fm::layer_importance(enc, imgs, 4, fm::Sublayer::mlp, fm::AblationMode::mean);
  EXPECT_GE(mean.score, 0.0);
  EXPECT_NE(zero.score, mean.score);
  // A single sample is its own mean, so mean ablation changes nothing.
  EXPECT_NEAR(fm::layer_importance(enc, {imgs[0]}, 4, fm::Sublayer::mlp,
                                   fm::AblationMode::mean).score, 0.0, 1e-12);
  EXPECT_THROW(fm::layer_importance(enc, {}, 0, fm::Sublayer::mlp), fm::ArgumentError);
  EXPECT_THROW(fm::layer_importance(enc, imgs, 5, fm::Sublayer::mlp), fm::ArgumentError);
  EXPECT_THROW(fm::parse_ablation_mode("half"), fm::ConfigError);
}

TEST(Steering, AxisAlignedMeans) {
  Eigen::MatrixXd codes(4, 3);
  codes << 1, 0, 0, 1, 0, 0, -1, 0, 0, -1, 0, 0;
  const std::vector<Authenticity> labels = {Authenticity::fake, Authenticity::fake,
                                            Authenticity::real, Authenticity::real};
  const auto v = fm::steering_vector(codes, labels, std::nullopt,
                                     fm::SteeringConstruction::class_mean_diff, 0);
  EXPECT_NEAR((v.v - Eigen::Vector3d(1, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_EQ(v.id(), "class_mean_diff");
}

TEST(Steering, Errors) {
  const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(4, 3);
  const std::vector<Authenticity> labels = alternating(4);
  EXPECT_THROW(fm::steering_vector(same, labels, std::nullopt,
                                   fm::SteeringConstruction::class_mean_diff, 0),
               fm::DegenerateError);
  EXPECT_THROW(fm::steering_vector(same, std::vector<Authenticity>(4, Authenticity::real),
                                   std::nullopt, fm::SteeringConstruction::class_mean_diff, 0),
               fm::ArgumentError);
  EXPECT_THROW(fm::steering_vector(same, labels, std::nullopt,
                                   fm::SteeringConstruction::top_selectivity, 2),
               fm::ArgumentError);
  EXPECT_THROW(fm::steering_vector(same, labels, Eigen::VectorXd::Ones(3),
                                   fm::SteeringConstruction::top_selectivity, 4),
               fm::ArgumentError);
}

TEST(Steering, PlantedAtomSeven) {
  const auto base = fm::generate_synthetic_codes(200, 64, 16, 3, 21);
  Eigen::MatrixXd codes = base.coefficients;
  const auto labels = alternating(200);
  for (int i = 0; i < 200; ++i)
    if (labels[i] == Authenticity::fake) codes(i, 7) += 2.0;
  const auto v = fm::steering_vector(codes, labels, std::nullopt,
                                     fm::SteeringConstruction::class_mean_diff, 0);
  Eigen::Index arg;
  v.v.cwiseAbs().maxCoeff(&arg);
  EXPECT_EQ(arg, 7);
  EXPECT_NEAR(v.v.norm(), 1.0, 1e-10);
}

TEST(Steering, TopKMasks) {
  Eigen::MatrixXd codes(4, 4);
  codes << 1, 2, 3, 4, 1, 2, 3, 4, 0, 0, 0, 0, 0, 0, 0, 0;
  const std::vector<Authenticity> labels = {Authenticity::fake, Authenticity::fake,
                                            Authenticity::real, Authenticity::real};
  const Eigen::Vector4d rho(0.9, -0.1, 0.2, -0.8);
  const auto cmd = fm::steering_vector(codes, labels, Eigen::VectorXd(rho),
                                       fm::SteeringConstruction::class_mean_diff, 2);
  EXPECT_EQ(cmd.v(1), 0.0);
  EXPECT_EQ(cmd.v(2), 0.0);
  EXPECT_NEAR(cmd.v(0), 1.0 / std::sqrt(17.0), 1e-15);
  EXPECT_EQ(cmd.id(), "class_mean_diff_k2");
  const auto top = fm::steering_vector(codes, labels, Eigen::VectorXd(rho),
                                       fm::SteeringConstruction::top_selectivity, 2);
  EXPECT_NEAR(top.v(0), 0.9 / std::hypot(0.9, 0.8), 1e-15);
  EXPECT_NEAR(top.v(3), -0.8 / std::hypot(0.9, 0.8), 1e-15);
  EXPECT_EQ(top.v(1), 0.0);
}

TEST(Steering, ApplyIsLinear) {
  fm::SteeringVector v{Eigen::Vector3d(1, 0, 0), fm::SteeringConstruction::class_mean_diff, 0};
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  EXPECT_EQ(fm::apply_steering(zero, v, 1.5), Eigen::VectorXd(Eigen::Vector3d(1.5, 0, 0)));
  const Eigen::VectorXd h = Eigen::Vector3d(0.3, -1, 2);
  EXPECT_EQ(fm::apply_steering(h, v, 0.0), h);
  v.v = Eigen::Vector3d(0.6, 0, 0.8);
  const Eigen::VectorXd twice = fm::apply_steering(fm::apply_steering(h, v, 0.25), v, 0.5);
  EXPECT_LT((twice - fm::apply_steering(h, v, 0.75)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Steering, CurveBaselineAndDirection) {
  const auto base = fm::generate_synthetic_codes(300, 32, 8, 2, 5);
  Eigen::MatrixXd codes = base.coefficients;
  const auto labels = alternating(300);
  for (int i = 0; i < 300; ++i)
    if (labels[i] == Authenticity::fake) codes(i, 3) += 0.5;
  const auto head = fm::LogisticHead::fit(codes, labels);
  const auto v = fm::steering_vector(codes, labels, std::nullopt,
                                     fm::SteeringConstruction::class_mean_diff, 0);
  const auto curve = fm::steering_curve(head, codes, labels, v);
  ASSERT_EQ(curve.alphas, fm::kDefaultAlphas);
  ASSERT_EQ(curve.accuracy.size(), curve.alphas.size());
  EXPECT_EQ(curve.accuracy[4], head.accuracy(codes, labels));
  EXPECT_GT(curve.accuracy[6], curve.accuracy[4]);
  EXPECT_LT(curve.accuracy[2], curve.accuracy[4]);
  for (double a : curve.accuracy) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  EXPECT_THROW(fm::steering_curve(head, Eigen::MatrixXd(0, 8), {}, v), fm::ArgumentError);
}

TEST(LogisticHead, SeparatesClasses) {
  Eigen::MatrixXd codes(6, 2);
  codes << 0, 1, 0.1, 1, 0.2, 1, 1, 1, 1.1, 1, 1.2, 1;
  const std::vector<Authenticity> labels(
      {Authenticity::real, Authenticity::real, Authenticity::real, Authenticity::fake,
       Authenticity::fake, Authenticity::fake});
  const auto head = fm::LogisticHead::fit(codes, labels);
  EXPECT_EQ(head.accuracy(codes, labels), 1.0);
  EXPECT_EQ(head.predict(Eigen::Vector2d(2, 1)), Authenticity::fake);
  const auto again = fm::LogisticHead::fit(codes, labels);
  EXPECT_EQ(head.weights(), again.weights());
}
