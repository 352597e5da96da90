#include <gtest/gtest.h>

#include <cmath>

#include "orthotune/energy.hpp"
#include "orthotune/ortho.hpp"

#include "test_support.hpp"

using namespace orthotune;

TEST(Energy, TwoOrthonormalNeurons) {
  // e1, e2 at distance sqrt(2); two ordered pairs give 2/sqrt(2) = sqrt(2).
  const EnergyReport rep = hyperspherical_energy(Eigen::MatrixXd::Identity(2, 2));
  EXPECT_NEAR(rep.energy, std::sqrt(2.0), 1e-15);
  EXPECT_EQ(rep.pair_count, 2);
  EXPECT_EQ(rep.clipped_pairs, 0);
  EXPECT_NEAR(rep.min_pair_distance, std::sqrt(2.0), 1e-15);
}

TEST(Energy, ScaleInvariance) {
  Rng rng(41);
  const Eigen::MatrixXd w = testsup::random_matrix(rng, 4, 6);
  EXPECT_NEAR(hyperspherical_energy(w).energy, hyperspherical_energy(3.0 * w).energy, 1e-12);
}

TEST(Energy, OrthogonalInvariance) {
  Rng rng(42);
  const Eigen::MatrixXd w = testsup::random_matrix(rng, 4, 6);
  const Eigen::MatrixXd r = testsup::random_rotation(rng, 4);
  const double he = hyperspherical_energy(w).energy;
  EXPECT_LE(energy_gap(r * w, w), 1e-8 * he);
}

TEST(Energy, GapIsZeroOnIdenticalInput) {
  Rng rng(43);
  const Eigen::MatrixXd w = testsup::random_matrix(rng, 3, 5);
  EXPECT_EQ(energy_gap(w, w), 0.0);
}

TEST(Energy, GapPositiveUnderGenericPerturbation) {
  Rng rng(44);
  const Eigen::MatrixXd w0 = testsup::random_matrix(rng, 4, 6);
  const Eigen::MatrixXd w = w0 + 0.5 * testsup::random_matrix(rng, 4, 6);
  EXPECT_GT(energy_gap(w, w0), 0.0);
}

TEST(Energy, PermutationInvariance) {
  Rng rng(45);
  const Eigen::MatrixXd w = testsup::random_matrix(rng, 4, 5);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(5, 5);
  p(0, 2) = p(1, 0) = p(2, 4) = p(3, 1) = p(4, 3) = 1.0;
  EXPECT_NEAR(hyperspherical_energy(w).energy, hyperspherical_energy(w * p).energy, 1e-12);
}

TEST(Energy, MovingNeuronsCloserIncreasesEnergy) {
  // Two neurons at a shrinking angle: energy 2 / (2 sin(theta/2)) grows.
  auto pair_at = [](double theta) {
    Eigen::MatrixXd w(2, 2);
    w.col(0) = Eigen::Vector2d(1.0, 0.0);
    w.col(1) = Eigen::Vector2d(std::cos(theta), std::sin(theta));
    return w;
  };
  double prev = hyperspherical_energy(pair_at(1.0)).energy;
  for (double theta : {0.8, 0.6, 0.4, 0.2}) {
    const double cur = hyperspherical_energy(pair_at(theta)).energy;
    EXPECT_GT(cur, prev);
    prev = cur;
  }

  // Same monotonicity with bystander neurons present.
  Eigen::MatrixXd w(3, 4);
  w << 1, 0, 0, 0.6, 0, 1, 0, 0.6, 0, 0, 1, 0.52915026221291817;
  const double base = hyperspherical_energy(w).energy;
  w.col(3) = 0.9 * w.col(0) + 0.1 * w.col(3);  // pull neuron 3 toward neuron 0
  EXPECT_GT(hyperspherical_energy(w).energy, base);
}

TEST(Energy, CoincidentNeuronsAreClippedNotInfinite) {
  Eigen::MatrixXd w(2, 3);
  w.col(0) = Eigen::Vector2d(1.0, 0.0);
  w.col(1) = Eigen::Vector2d(2.0, 0.0);  // same direction as col 0
  w.col(2) = Eigen::Vector2d(0.0, 1.0);
  const EnergyReport rep = hyperspherical_energy(w);
  EXPECT_TRUE(std::isfinite(rep.energy));
  EXPECT_EQ(rep.clipped_pairs, 2);  // both orderings of the coincident pair
  EXPECT_EQ(rep.min_pair_distance, 0.0);
}

TEST(Energy, ErrorsOnDegenerateInput) {
  Eigen::MatrixXd w(2, 2);
  w << 1, 0, 0, 0;  // second column has zero norm
  EXPECT_THROW(hyperspherical_energy(w), contract_error);
  EXPECT_THROW(hyperspherical_energy(Eigen::MatrixXd::Ones(3, 1)), contract_error);
}
