#include <gtest/gtest.h>

#include <cmath>

#include "orthotune/toy_model.hpp"

#include "test_support.hpp"

using namespace orthotune;

namespace {

RunConfig toy_config() {
  RunConfig cfg;
  cfg.d_s = 4;
  cfg.validate();
  return cfg;
}

}  // namespace

TEST(Pretrained, DeterministicPerSeed) {
  const RunConfig cfg = toy_config();
  const PretrainedStack a = PretrainedStack::make(cfg, 7);
  const PretrainedStack b = PretrainedStack::make(cfg, 7);
  const PretrainedStack c = PretrainedStack::make(cfg, 8);
  EXPECT_TRUE(a.equals(b));
  EXPECT_FALSE(a.equals(c));
}

TEST(Pretrained, ShapesMatchConfig) {
  const RunConfig cfg = toy_config();
  const PretrainedStack s = PretrainedStack::make(cfg, 1);
  EXPECT_EQ(s.layer_count(), 2u);
  EXPECT_EQ(s.layer(Modality::text, 0).rows(), 8);
  EXPECT_EQ(s.layer(Modality::image, 1).cols(), 8);
  EXPECT_EQ(s.projection(Modality::text).rows(), 4);
  EXPECT_EQ(s.projection(Modality::image).cols(), 8);
}

TEST(Pretrained, ColumnNormsWithinBounds) {
  const RunConfig cfg = toy_config();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const PretrainedStack s = PretrainedStack::make(cfg, seed);
    for (std::size_t l = 0; l < s.layer_count(); ++l) {
      for (Modality m : {Modality::text, Modality::image}) {
        const Eigen::MatrixXd& w = s.layer(m, l);
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
          const double n = w.col(j).norm();
          EXPECT_GE(n, 1e-3);
          EXPECT_LE(n, 1e3);
        }
      }
    }
  }
}

TEST(SynthPairs, DeterministicAndAligned) {
  const RunConfig cfg = toy_config();
  const SynthBatch a = synth_pairs(cfg, 3, 16);
  const SynthBatch b = synth_pairs(cfg, 3, 16);
  EXPECT_EQ(a.x_image, b.x_image);
  EXPECT_EQ(a.x_text, b.x_text);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_THROW(synth_pairs(cfg, 3, 1), contract_error);
}

TEST(SynthPairs, ZeroNoiseGivesExactLinearImages) {
  RunConfig cfg = toy_config();
  cfg.noise_scale = 0.0;
  const SynthBatch b = synth_pairs(cfg, 5, 32);
  const SynthMixing mix = synth_mixing_maps(cfg, 5);
  // Columns must lie exactly in the mixing maps' column spaces.
  const Eigen::MatrixXd zv = mix.a_image.colPivHouseholderQr().solve(b.x_image);
  EXPECT_LE((mix.a_image * zv - b.x_image).cwiseAbs().maxCoeff(), 1e-10);
  const Eigen::MatrixXd ze = mix.a_text.colPivHouseholderQr().solve(b.x_text);
  EXPECT_LE((mix.a_text * ze - b.x_text).cwiseAbs().maxCoeff(), 1e-10);
  // And the recovered latents agree across towers.
  EXPECT_LE((zv - ze).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SynthPairs, PairedCorrelationBeatsShuffledBaseline) {
  const RunConfig cfg = toy_config();
  const SynthBatch b = synth_pairs(cfg, 11, 256);
  const SynthMixing mix = synth_mixing_maps(cfg, 11);
  const Eigen::MatrixXd zv = mix.a_image.colPivHouseholderQr().solve(b.x_image);
  const Eigen::MatrixXd ze = mix.a_text.colPivHouseholderQr().solve(b.x_text);

  auto mean_cos = [&](int shift) {
    double acc = 0.0;
    const Eigen::Index n = zv.cols();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index j = (i + shift) % n;
      acc += zv.col(i).dot(ze.col(j)) / (zv.col(i).norm() * ze.col(j).norm());
    }
    return acc / static_cast<double>(n);
  };
  EXPECT_GT(mean_cos(0), mean_cos(17) + 0.5);
}

TEST(ForwardTower, IdentityAdaptersMatchPretrainedForward) {
  const RunConfig cfg = toy_config();
  const PretrainedStack s = PretrainedStack::make(cfg, 2);
  const SynthBatch b = synth_pairs(cfg, 2, 8);
  std::vector<Eigen::MatrixXd> w;
  for (std::size_t l = 0; l < s.layer_count(); ++l) w.push_back(s.layer(Modality::image, l));
  const Eigen::MatrixXd via_weights = forward_tower(s, w, b.x_image, Modality::image);
  const Eigen::MatrixXd direct = forward_tower_pretrained(s, b.x_image, Modality::image);
  EXPECT_LE((via_weights - direct).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardTower, MatchesStraightLineOracle) {
  const RunConfig cfg = toy_config();
  const PretrainedStack s = PretrainedStack::make(cfg, 9);
  const SynthBatch b = synth_pairs(cfg, 9, 4);
  Rng rng(99);
  std::vector<Eigen::MatrixXd> w{testsup::random_matrix(rng, 8, 8),
                                 testsup::random_matrix(rng, 8, 8)};
  const Eigen::MatrixXd got = forward_tower(s, w, b.x_text, Modality::text);

  for (Eigen::Index j = 0; j < 4; ++j) {
    Eigen::VectorXd m = b.x_text.col(j);
    m = (w[0] * m).array().tanh().matrix();  // hidden layer
    m = w[1] * m;                            // last layer, no activation
    Eigen::VectorXd u = s.projection(Modality::text) * m;
    u /= u.norm();
    EXPECT_LE((got.row(j).transpose() - u).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ForwardTower, ZeroInputIsHardError) {
  const RunConfig cfg = toy_config();
  const PretrainedStack s = PretrainedStack::make(cfg, 4);
  std::vector<Eigen::MatrixXd> w;
  for (std::size_t l = 0; l < s.layer_count(); ++l) w.push_back(s.layer(Modality::text, l));
  EXPECT_THROW(forward_tower(s, w, Eigen::MatrixXd::Zero(8, 3), Modality::text),
               contract_error);
}

TEST(AlignmentLoss, PerfectAlignmentLimit) {
  Eigen::MatrixXd e(2, 2);
  e << 1, 0, 0, 1;  // orthonormal rows
  EXPECT_LE(alignment_loss(e, e, 0.01), 1e-12);
}

TEST(AlignmentLoss, CollapsedEmbeddingsGiveLogN) {
  const Eigen::Index n = 5;
  Eigen::MatrixXd ev(n, 3), ee(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    ev.row(i) = Eigen::RowVector3d(1, 0, 0);
    ee.row(i) = Eigen::RowVector3d(0.6, 0.8, 0);
  }
  // Constant similarity matrix: both directions are uniform softmaxes.
  // (Equality is up to the rounding of the n-term mean.)
  EXPECT_NEAR(alignment_loss(ev, ee, 0.07), std::log(static_cast<double>(n)), 1e-14);
}

TEST(AlignmentLoss, JointPermutationInvariance) {
  Rng rng(77);
  Eigen::MatrixXd ev = testsup::random_matrix(rng, 6, 3);
  Eigen::MatrixXd ee = testsup::random_matrix(rng, 6, 3);
  const double base = alignment_loss(ev, ee, 0.2);
  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  Eigen::MatrixXd pv(6, 3), pe(6, 3);
  for (int i = 0; i < 6; ++i) {
    pv.row(i) = ev.row(perm[static_cast<std::size_t>(i)]);
    pe.row(i) = ee.row(perm[static_cast<std::size_t>(i)]);
  }
  EXPECT_NEAR(alignment_loss(pv, pe, 0.2), base, 1e-12);
}

TEST(AlignmentLoss, RejectsBadArguments) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(alignment_loss(e, e, 0.0), contract_error);
  EXPECT_THROW(alignment_loss(e, Eigen::MatrixXd::Identity(3, 3), 0.1), contract_error);
  EXPECT_THROW(alignment_loss(Eigen::MatrixXd::Ones(1, 2), Eigen::MatrixXd::Ones(1, 2), 0.1),
               contract_error);
}
